#include "kefce/eval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <map>

#include "kefce/regret.hpp"

namespace kefce {

nlohmann::json GapReport::to_json() const {
  nlohmann::json j;
  j["gap"] = gap;
  j["player"] = player;
  j["per_player"] = per_player;
  j["modification_digest"] = modification_digest;
  return j;
}

namespace {

// Shared evaluation context: a mixture seen from one player's side.
struct Ctx {
  const TreeGame* game = nullptr;
  int me = 0;
  std::vector<const ProductPolicy*> comps;
  std::vector<double> wts;  // folded into the root reach
  std::vector<std::vector<int>> pos;  // [layer][state] -> position within own infoset
  long long budget = 0;
  long long used = 0;

  int players() const { return game->num_players(); }
  int A() const { return game->num_actions(me); }
};

Ctx make_ctx(const TreeGame& game, int me, const CorrelatedPolicy& pibar,
             long long budget) {
  Ctx ctx;
  ctx.game = &game;
  ctx.me = me;
  for (const auto& comp : pibar.components) ctx.comps.push_back(&comp);
  ctx.wts = pibar.weights;
  ctx.budget = budget;
  ctx.pos.resize(game.horizon());
  for (int l = 0; l < game.horizon(); ++l) {
    ctx.pos[l].assign(game.num_states(l), -1);
    for (int x = 0; x < game.num_infosets(me, l); ++x) {
      const auto& members = game.infoset(me, l, x).states;
      for (int p = 0; p < static_cast<int>(members.size()); ++p)
        ctx.pos[l][members[p]] = p;
    }
  }
  return ctx;
}

// Reach weights of one (infoset, rechistory) node: [component][member position].
using Reach = std::vector<std::vector<double>>;

// Opponent-weighted own-action reward vector at a state under one component.
void own_reward(const Ctx& ctx, int comp, int layer, int state, std::vector<double>& out) {
  const TreeGame& g = *ctx.game;
  const StateNode& s = g.state(layer, state);
  std::fill(out.begin(), out.end(), 0.0);
  for (int j = 0; j < g.num_joint_actions(); ++j) {
    double w = 1.0;
    for (int p = 0; p < ctx.players(); ++p) {
      if (p == ctx.me) continue;
      w *= (*ctx.comps[comp])[p].prob(layer, s.infoset[p], g.joint_component(j, p));
    }
    if (w == 0.0) continue;
    out[g.joint_component(j, ctx.me)] += w * s.reward[j][ctx.me];
  }
}

// partial[comp][a] = sum over members of reach * opponent-weighted reward.
std::vector<std::vector<double>> immediate_terms(const Ctx& ctx, int layer,
                                                 const Infoset& x, const Reach& reach) {
  std::vector<std::vector<double>> partial(ctx.comps.size(),
                                           std::vector<double>(ctx.A(), 0.0));
  std::vector<double> r(ctx.A());
  for (std::size_t c = 0; c < ctx.comps.size(); ++c) {
    for (std::size_t p = 0; p < x.states.size(); ++p) {
      if (reach[c][p] == 0.0) continue;
      own_reward(ctx, static_cast<int>(c), layer, x.states[p], r);
      for (int a = 0; a < ctx.A(); ++a) partial[c][a] += reach[c][p] * r[a];
    }
  }
  return partial;
}

// Pushes a node's reach down to one child infoset. `rec_prob`, when present,
// multiplies in the per-component recommendation probability at the parent.
Reach child_reach(const Ctx& ctx, int layer, const Reach& reach, int child,
                  const std::vector<double>* rec_prob) {
  const TreeGame& g = *ctx.game;
  const Infoset& cx = g.infoset(ctx.me, layer + 1, child);
  Reach out(ctx.comps.size(), std::vector<double>(cx.states.size(), 0.0));
  for (std::size_t p = 0; p < cx.states.size(); ++p) {
    const StateNode& sn = g.state(layer + 1, cx.states[p]);
    const StateNode& parent = g.state(layer, sn.parent_state);
    int ppos = ctx.pos[layer][sn.parent_state];
    for (std::size_t c = 0; c < ctx.comps.size(); ++c) {
      double w = reach[c][ppos];
      if (w == 0.0) continue;
      w *= sn.parent_prob;
      for (int j = 0; j < ctx.players(); ++j) {
        if (j == ctx.me) continue;
        w *= (*ctx.comps[c])[j].prob(layer, parent.infoset[j],
                                     g.joint_component(sn.parent_joint, j));
      }
      if (rec_prob) w *= (*rec_prob)[c];
      out[c][p] = w;
    }
  }
  return out;
}

Rechistory extend(const Rechistory& r, int layer, Action rec, Action taken, int K) {
  Rechistory next = r;
  next.length = layer + 1;
  if (rec != taken) next.deviations.emplace_back(layer, rec);
  if (static_cast<int>(next.deviations.size()) == K &&
      !next.deviations.empty() && next.deviations.back().first == layer) {
    next.kind = Rechistory::Kind::TypeII;
  } else {
    next.kind = Rechistory::Kind::TypeI;
  }
  return next;
}

// Backward induction over (infoset, rechistory) nodes; fills the argmax
// modification as it unwinds.
long double dp_solve(Ctx& ctx, const RechistoryCache& cache, StrategyModification& phi,
                     int layer, int x, const Rechistory& r, const Reach& reach) {
  if (++ctx.used > ctx.budget)
    throw BudgetExceeded("augmented-tree evaluation exceeds the configured cap");
  const TreeGame& g = *ctx.game;
  const Infoset& info = g.infoset(ctx.me, layer, x);
  const RechistorySet& set = cache.at(layer, x);
  auto partial = immediate_terms(ctx, layer, info, reach);
  int A = ctx.A();
  bool last = layer + 1 == g.horizon();

  if (r.kind == Rechistory::Kind::TypeII) {
    int idx = set.lookup_type2(r);
    long double best = 0.0;
    Action best_a = 0;
    for (Action a = 0; a < A; ++a) {
      long double v = 0.0;
      for (std::size_t c = 0; c < ctx.comps.size(); ++c) v += partial[c][a];
      if (!last) {
        for (int child : info.children[a]) {
          Reach cr = child_reach(ctx, layer, reach, child, nullptr);
          v += dp_solve(ctx, cache, phi, layer + 1, child, r, cr);
        }
      }
      if (a == 0 || v > best) {
        best = v;
        best_a = a;
      }
    }
    phi.type2[layer][x][idx] = best_a;
    return best;
  }

  int idx = set.lookup_type1(r);
  long double total = 0.0;
  std::vector<double> rec_prob(ctx.comps.size());
  for (Action rec = 0; rec < A; ++rec) {
    for (std::size_t c = 0; c < ctx.comps.size(); ++c)
      rec_prob[c] = (*ctx.comps[c])[ctx.me].prob(layer, x, rec);
    long double best = 0.0;
    Action best_a = 0;
    for (Action a = 0; a < A; ++a) {
      long double v = 0.0;
      for (std::size_t c = 0; c < ctx.comps.size(); ++c) v += rec_prob[c] * partial[c][a];
      if (!last) {
        Rechistory next = extend(r, layer, rec, a, cache.K());
        for (int child : info.children[a]) {
          Reach cr = child_reach(ctx, layer, reach, child, &rec_prob);
          v += dp_solve(ctx, cache, phi, layer + 1, child, next, cr);
        }
      }
      if (a == 0 || v > best) {
        best = v;
        best_a = a;
      }
    }
    phi.type1[layer][x][idx][rec] = best_a;
    total += best;
  }
  return total;
}

Rechistory root_rechistory(int K) {
  if (K == 0) return Rechistory{Rechistory::Kind::TypeII, 0, {}};
  return Rechistory{Rechistory::Kind::TypeI, 0, {}};
}

long double modified_value_rec(const Ctx& ctx, const RechistoryCache& cache,
                               const StrategyModification& phi, const ProductPolicy& pi,
                               long long& used, long long budget, int layer, int state,
                               const Rechistory& r, double prob) {
  if (++used > budget)
    throw BudgetExceeded("modified-policy evaluation exceeds the configured cap");
  const TreeGame& g = *ctx.game;
  const StateNode& s = g.state(layer, state);
  int me = ctx.me;
  int x = s.infoset[me];
  const RechistorySet& set = cache.at(layer, x);
  long double total = 0.0;

  auto expand = [&](Action taken, double weight, const Rechistory& next) {
    for (int j = 0; j < g.num_joint_actions(); ++j) {
      if (g.joint_component(j, me) != taken) continue;
      double w = weight;
      for (int p = 0; p < ctx.players(); ++p) {
        if (p == me) continue;
        w *= pi[p].prob(layer, s.infoset[p], g.joint_component(j, p));
      }
      if (w == 0.0) continue;
      total += static_cast<long double>(w) * s.reward[j][me];
      if (layer + 1 < g.horizon()) {
        for (auto& [c, pr] : s.next[j])
          total += modified_value_rec(ctx, cache, phi, pi, used, budget, layer + 1, c,
                                      next, w * pr);
      }
    }
  };

  if (r.kind == Rechistory::Kind::TypeII) {
    Action a = phi.type2[layer][x][set.lookup_type2(r)];
    expand(a, prob, r);
  } else {
    int idx = set.lookup_type1(r);
    for (Action rec = 0; rec < ctx.A(); ++rec) {
      double pr = pi[me].prob(layer, x, rec);
      if (pr == 0.0) continue;
      Action a = phi.type1[layer][x][idx][rec];
      expand(a, prob * pr, extend(r, layer, rec, a, cache.K()));
    }
  }
  return total;
}

}  // namespace

double value_of_modified(const TreeGame& game, const RechistoryCache& cache,
                         const StrategyModification& phi, const ProductPolicy& pi,
                         long long budget) {
  CorrelatedPolicy single;
  single.weights = {1.0};
  single.components = {pi};
  Ctx ctx = make_ctx(game, cache.player(), single, budget);
  long long used = 0;
  long double total = 0.0;
  Rechistory root = root_rechistory(cache.K());
  for (int s = 0; s < game.num_states(0); ++s) {
    double p0 = game.initial_distribution()[s];
    if (p0 == 0.0) continue;
    total += modified_value_rec(ctx, cache, phi, pi, used, budget, 0, s, root, p0);
  }
  return static_cast<double>(total);
}

double value_of_modified(const TreeGame& game, const RechistoryCache& cache,
                         const StrategyModification& phi, const CorrelatedPolicy& pibar,
                         long long budget) {
  long double total = 0.0;
  for (int t = 0; t < pibar.size(); ++t)
    total += static_cast<long double>(pibar.weights[t]) *
             value_of_modified(game, cache, phi, pibar.components[t], budget);
  return static_cast<double>(total);
}

GapReport kefce_gap(const TreeGame& game, const CorrelatedPolicy& pibar, int K,
                    long long budget) {
  if (pibar.components.empty()) throw EmptyMixture("gap of an empty mixture");

  auto solve_player = [&](int i) {
    RechistoryCache cache(game, i, K, budget);
    StrategyModification phi = StrategyModification::identity(cache);
    Ctx ctx = make_ctx(game, i, pibar, budget);
    long double best_value = 0.0;
    Rechistory root = root_rechistory(cache.K());
    for (int x = 0; x < game.num_infosets(i, 0); ++x) {
      const Infoset& info = game.infoset(i, 0, x);
      Reach reach(ctx.comps.size(), std::vector<double>(info.states.size()));
      for (std::size_t c = 0; c < ctx.comps.size(); ++c)
        for (std::size_t p = 0; p < info.states.size(); ++p)
          reach[c][p] = ctx.wts[c] * game.initial_distribution()[info.states[p]];
      best_value += dp_solve(ctx, cache, phi, 0, x, root, reach);
    }
    double gap_i = static_cast<double>(best_value) - value(game, pibar, i);
    return std::make_pair(gap_i, std::move(phi));
  };

  // Per-player computations are independent; run them concurrently.
  std::vector<std::future<std::pair<double, StrategyModification>>> futures;
  for (int i = 1; i < game.num_players(); ++i)
    futures.push_back(std::async(std::launch::async, solve_player, i));

  GapReport report;
  report.per_player.resize(game.num_players());
  for (int i = 0; i < game.num_players(); ++i) {
    auto [gap_i, phi] = i == 0 ? solve_player(0) : futures[i - 1].get();
    report.per_player[i] = gap_i;
    if (report.player < 0 || gap_i > report.gap) {
      report.gap = gap_i;
      report.player = i;
      report.best = std::move(phi);
      report.modification_digest = report.best->digest();
    }
  }
  return report;
}

GapReport kefce_gap_bruteforce(const TreeGame& game, const CorrelatedPolicy& pibar,
                               int K, long long max_modifications) {
  if (pibar.components.empty()) throw EmptyMixture("gap of an empty mixture");
  GapReport report;
  report.per_player.resize(game.num_players());
  for (int i = 0; i < game.num_players(); ++i) {
    RechistoryCache cache(game, i, K, max_modifications);
    int A = game.num_actions(i);
    auto swaps = all_swap_maps(A);
    int num_swaps = static_cast<int>(swaps.size());

    struct Slot {
      int layer, x, idx;
      bool is_swap;
    };
    std::vector<Slot> slots;
    double count = 1.0;
    for (int l = 0; l < game.horizon(); ++l) {
      for (int x = 0; x < game.num_infosets(i, l); ++x) {
        const RechistorySet& set = cache.at(l, x);
        for (int t = 0; t < static_cast<int>(set.type1.size()); ++t) {
          slots.push_back({l, x, t, true});
          count *= num_swaps;
        }
        for (int t = 0; t < static_cast<int>(set.type2.size()); ++t) {
          slots.push_back({l, x, t, false});
          count *= A;
        }
        if (count > static_cast<double>(max_modifications))
          throw BudgetExceeded("modification space exceeds the evaluation cap");
      }
    }

    StrategyModification phi = StrategyModification::identity(cache);
    std::vector<int> digit(slots.size(), 0);
    auto apply = [&](std::size_t k) {
      const Slot& s = slots[k];
      if (s.is_swap)
        phi.type1[s.layer][s.x][s.idx] = swaps[digit[k]];
      else
        phi.type2[s.layer][s.x][s.idx] = digit[k];
    };
    for (std::size_t k = 0; k < slots.size(); ++k) apply(k);

    double best_value = 0.0;
    bool first = true;
    StrategyModification best_phi = phi;
    while (true) {
      long double v = 0.0;
      for (int t = 0; t < pibar.size(); ++t)
        v += static_cast<long double>(pibar.weights[t]) *
             value_of_modified(game, cache, phi, pibar.components[t]);
      if (first || static_cast<double>(v) > best_value) {
        best_value = static_cast<double>(v);
        best_phi = phi;
        first = false;
      }
      std::size_t k = 0;
      for (; k < slots.size(); ++k) {
        int range = slots[k].is_swap ? num_swaps : A;
        if (++digit[k] < range) {
          apply(k);
          break;
        }
        digit[k] = 0;
        apply(k);
      }
      if (k == slots.size()) break;
    }

    double gap_i = best_value - value(game, pibar, i);
    report.per_player[i] = gap_i;
    if (report.player < 0 || gap_i > report.gap) {
      report.gap = gap_i;
      report.player = i;
      report.best = best_phi;
      report.modification_digest = best_phi.digest();
    }
  }
  return report;
}

namespace {

// Weighted best response over the player's infoset subtree rooted at one node.
long double best_response_from(Ctx& ctx, int layer, int x, const Reach& reach) {
  const TreeGame& g = *ctx.game;
  const Infoset& info = g.infoset(ctx.me, layer, x);
  auto partial = immediate_terms(ctx, layer, info, reach);
  bool last = layer + 1 == g.horizon();
  long double best = 0.0;
  for (Action a = 0; a < ctx.A(); ++a) {
    long double v = 0.0;
    for (std::size_t c = 0; c < ctx.comps.size(); ++c) v += partial[c][a];
    if (!last) {
      for (int child : info.children[a]) {
        Reach cr = child_reach(ctx, layer, reach, child, nullptr);
        v += best_response_from(ctx, layer + 1, child, cr);
      }
    }
    if (a == 0 || v > best) best = v;
  }
  return best;
}

}  // namespace

double nfcce_gap(const TreeGame& game, const CorrelatedPolicy& pibar) {
  double best = 0.0;
  for (int i = 0; i < game.num_players(); ++i) {
    Ctx ctx = make_ctx(game, i, pibar, 1LL << 60);
    long double total = 0.0;
    for (int x = 0; x < game.num_infosets(i, 0); ++x) {
      const Infoset& info = game.infoset(i, 0, x);
      Reach reach(ctx.comps.size(), std::vector<double>(info.states.size()));
      for (std::size_t c = 0; c < ctx.comps.size(); ++c)
        for (std::size_t p = 0; p < info.states.size(); ++p)
          reach[c][p] = ctx.wts[c] * game.initial_distribution()[info.states[p]];
      total += best_response_from(ctx, 0, x, reach);
    }
    double gap_i = static_cast<double>(total) - value(game, pibar, i);
    if (i == 0 || gap_i > best) best = gap_i;
  }
  return best;
}

double trigger_gap(const TreeGame& game, const CorrelatedPolicy& pibar) {
  double best = 0.0;
  bool first = true;
  for (int i = 0; i < game.num_players(); ++i) {
    Ctx ctx = make_ctx(game, i, pibar, 1LL << 60);
    int T = pibar.size();
    int H = game.horizon();

    // Per component: full-policy reach of every state and own-action Q values.
    std::vector<std::vector<std::vector<double>>> reach(T);   // [t][layer][state]
    std::vector<std::vector<std::vector<std::vector<double>>>> q(T);  // [t][layer][state][a]
    for (int t = 0; t < T; ++t) {
      const ProductPolicy& pi = pibar.components[t];
      reach[t].resize(H);
      reach[t][0] = game.initial_distribution();
      for (int l = 0; l + 1 < H; ++l) {
        reach[t][l + 1].assign(game.num_states(l + 1), 0.0);
        for (int k = 0; k < game.num_states(l); ++k) {
          const StateNode& s = game.state(l, k);
          if (reach[t][l][k] == 0.0) continue;
          for (int j = 0; j < game.num_joint_actions(); ++j) {
            double w = reach[t][l][k];
            for (int p = 0; p < game.num_players(); ++p)
              w *= pi[p].prob(l, s.infoset[p], game.joint_component(j, p));
            if (w == 0.0) continue;
            for (auto& [c, pr] : s.next[j]) reach[t][l + 1][c] += w * pr;
          }
        }
      }
      q[t].resize(H);
      std::vector<double> value_next;
      for (int l = H - 1; l >= 0; --l) {
        q[t][l].assign(game.num_states(l),
                       std::vector<double>(game.num_actions(i), 0.0));
        std::vector<double> value_here(game.num_states(l), 0.0);
        for (int k = 0; k < game.num_states(l); ++k) {
          const StateNode& s = game.state(l, k);
          for (int j = 0; j < game.num_joint_actions(); ++j) {
            double w = 1.0;
            for (int p = 0; p < game.num_players(); ++p) {
              if (p == i) continue;
              w *= pi[p].prob(l, s.infoset[p], game.joint_component(j, p));
            }
            if (w == 0.0) continue;
            double cont = s.reward[j][i];
            if (l + 1 < H)
              for (auto& [c, pr] : s.next[j]) cont += pr * value_next[c];
            q[t][l][k][game.joint_component(j, i)] += w * cont;
          }
          for (Action a = 0; a < game.num_actions(i); ++a)
            value_here[k] += pi[i].prob(l, s.infoset[i], a) * q[t][l][k][a];
        }
        value_next = std::move(value_here);
      }
    }

    for (int l = 0; l < H; ++l) {
      for (int x = 0; x < game.num_infosets(i, l); ++x) {
        const Infoset& info = game.infoset(i, l, x);
        for (Action trig = 0; trig < game.num_actions(i); ++trig) {
          Reach mu(T, std::vector<double>(info.states.size(), 0.0));
          long double base = 0.0;
          for (int t = 0; t < T; ++t) {
            const ProductPolicy& pi = pibar.components[t];
            // reach[t] already carries the player's own on-path follow
            // probabilities; the trigger adds the recommendation at x.
            double rec = pi[i].prob(l, x, trig);
            for (std::size_t p = 0; p < info.states.size(); ++p) {
              double w = ctx.wts[t] * reach[t][l][info.states[p]] * rec;
              mu[t][p] = w;
              base += static_cast<long double>(w) * q[t][l][info.states[p]][trig];
            }
          }
          long double br = best_response_from(ctx, l, x, mu);
          double gain = static_cast<double>(br - base);
          if (first || gain > best) {
            best = gain;
            first = false;
          }
        }
      }
    }
  }
  return best;
}

double nfce_gap(const TreeGame& game, const CorrelatedPolicy& pibar) {
  for (const auto& comp : pibar.components)
    for (const auto& pi : comp)
      if (!pi.is_pure()) throw PurityRequired("nfce_gap needs a pure mixture");

  double best = 0.0;
  for (int i = 0; i < game.num_players(); ++i) {
    // Group components by the player's own pure policy: the deviation may
    // depend on the full recommended policy, so distinct books get
    // independent best responses.
    std::map<std::vector<int>, std::vector<int>> groups;
    for (int t = 0; t < pibar.size(); ++t) {
      std::vector<int> key;
      for (int l = 0; l < game.horizon(); ++l)
        for (const auto& row : pibar.components[t][i].rows[l])
          key.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) -
                                         row.begin()));
      groups[key].push_back(t);
    }
    long double total = 0.0;
    for (const auto& [key, members] : groups) {
      CorrelatedPolicy sub;
      for (int t : members) {
        sub.weights.push_back(pibar.weights[t]);
        sub.components.push_back(pibar.components[t]);
      }
      Ctx ctx = make_ctx(game, i, sub, 1LL << 60);
      for (int x = 0; x < game.num_infosets(i, 0); ++x) {
        const Infoset& info = game.infoset(i, 0, x);
        Reach reach(ctx.comps.size(), std::vector<double>(info.states.size()));
        for (std::size_t c = 0; c < ctx.comps.size(); ++c)
          for (std::size_t p = 0; p < info.states.size(); ++p)
            reach[c][p] = ctx.wts[c] * game.initial_distribution()[info.states[p]];
        total += best_response_from(ctx, 0, x, reach);
      }
    }
    double gap_i = static_cast<double>(total) - value(game, pibar, i);
    if (i == 0 || gap_i > best) best = gap_i;
  }
  return best;
}

double kefce_regret(const TreeGame& game, const std::vector<ProductPolicy>& policies,
                    int K, long long budget) {
  if (policies.empty()) throw EmptyMixture("regret of an empty policy sequence");
  CorrelatedPolicy pibar;
  int T = static_cast<int>(policies.size());
  pibar.weights.assign(T, 1.0 / T);
  pibar.components = policies;
  double best = 0.0;
  for (int i = 0; i < game.num_players(); ++i) {
    RechistoryCache cache(game, i, K, budget);
    StrategyModification phi = StrategyModification::identity(cache);
    Ctx ctx = make_ctx(game, i, pibar, budget);
    long double dp_total = 0.0;
    Rechistory root = root_rechistory(cache.K());
    for (int x = 0; x < game.num_infosets(i, 0); ++x) {
      const Infoset& info = game.infoset(i, 0, x);
      Reach reach(ctx.comps.size(), std::vector<double>(info.states.size()));
      for (std::size_t c = 0; c < ctx.comps.size(); ++c)
        for (std::size_t p = 0; p < info.states.size(); ++p)
          reach[c][p] = ctx.wts[c] * game.initial_distribution()[info.states[p]];
      dp_total += dp_solve(ctx, cache, phi, 0, x, root, reach);
    }
    (void)dp_total;
    long double regret = 0.0;
    for (const ProductPolicy& pi : policies)
      regret += static_cast<long double>(value_of_modified(game, cache, phi, pi, budget)) -
                value(game, pi, i);
    if (i == 0 || static_cast<double>(regret) > best) best = static_cast<double>(regret);
  }
  return best;
}

}  // namespace kefce
