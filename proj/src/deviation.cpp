#include "kefce/deviation.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <sstream>

namespace kefce {

std::vector<int> fill(std::vector<int> index_set, int n) {
  std::sort(index_set.begin(), index_set.end());
  if (n < static_cast<int>(index_set.size()))
    throw SizeError("fill: target size smaller than the index set");
  std::vector<int> out = index_set;
  int candidate = 1;
  std::size_t pos = 0;
  while (static_cast<int>(out.size()) < n) {
    while (pos < index_set.size() && index_set[pos] < candidate) ++pos;
    if (pos < index_set.size() && index_set[pos] == candidate) {
      ++candidate;
      continue;
    }
    out.push_back(candidate++);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> Rechistory::key() const {
  std::vector<int> k;
  k.push_back(kind == Kind::TypeI ? 0 : 1);
  k.push_back(length);
  for (auto& [step, b] : deviations) {
    k.push_back(step);
    k.push_back(b);
  }
  return k;
}

std::vector<Action> Rechistory::expand(const Infoset& x) const {
  std::vector<Action> b(length);
  for (int k = 0; k < length; ++k) b[k] = x.ancestors[k].second;
  for (auto& [step, a] : deviations) b[step] = a;
  return b;
}

int RechistorySet::lookup_type1(const Rechistory& r) const {
  auto it = index.find(r.key());
  if (it == index.end() || it->second.first != Rechistory::Kind::TypeI)
    throw RangeError("unknown Type-I rechistory");
  return it->second.second;
}

int RechistorySet::lookup_type2(const Rechistory& r) const {
  auto it = index.find(r.key());
  if (it == index.end() || it->second.first != Rechistory::Kind::TypeII)
    throw RangeError("unknown Type-II rechistory");
  return it->second.second;
}

namespace {

void for_each_subset(int range, int size, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> subset(size);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == size) {
      fn(subset);
      return;
    }
    for (int k = start; k < range; ++k) {
      subset[depth] = k;
      rec(k + 1, depth + 1);
    }
  };
  if (size <= range) rec(0, 0);
}

// Enumerates deviating-action assignments over `steps`, skipping the ancestor
// action at each step, in lexicographic order.
void for_each_deviation(const Infoset& x, const std::vector<int>& steps, int num_actions,
                        const std::function<void(const std::vector<Action>&)>& fn) {
  std::vector<Action> chosen(steps.size());
  std::function<void(std::size_t)> rec = [&](std::size_t depth) {
    if (depth == steps.size()) {
      fn(chosen);
      return;
    }
    Action forbidden = x.ancestors[steps[depth]].second;
    for (Action a = 0; a < num_actions; ++a) {
      if (a == forbidden) continue;
      chosen[depth] = a;
      rec(depth + 1);
    }
  };
  rec(0);
}

}  // namespace

RechistoryCache::RechistoryCache(const TreeGame& game, int player, int K, long long budget)
    : game_(&game), player_(player), K_(std::min(K, game.horizon())) {
  int H = game.horizon();
  int A = game.num_actions(player);
  sets_.resize(H);
  for (int l = 0; l < H; ++l) {
    sets_[l].resize(game.num_infosets(player, l));
    for (int idx = 0; idx < game.num_infosets(player, l); ++idx) {
      RechistorySet& set = sets_[l][idx];
      const Infoset& x = game.infoset(player, l, idx);
      if (K_ == 0) {
        set.type2.push_back(Rechistory{Rechistory::Kind::TypeII, 0, {}});
      } else {
        int max_dev = std::min(K_ - 1, l);
        for (int d = 0; d <= max_dev; ++d) {
          for_each_subset(l, d, [&](const std::vector<int>& w) {
            for_each_deviation(x, w, A, [&](const std::vector<Action>& acts) {
              Rechistory r{Rechistory::Kind::TypeI, l, {}};
              for (std::size_t p = 0; p < w.size(); ++p) r.deviations.emplace_back(w[p], acts[p]);
              set.type1.push_back(std::move(r));
            });
          });
        }
        // Type-II: the K-th deviation happens exactly at step e.
        for (int e = K_ - 1; e < l; ++e) {
          for_each_subset(e, K_ - 1, [&](const std::vector<int>& earlier) {
            std::vector<int> w = earlier;
            w.push_back(e);
            for_each_deviation(x, w, A, [&](const std::vector<Action>& acts) {
              Rechistory r{Rechistory::Kind::TypeII, e + 1, {}};
              for (std::size_t p = 0; p < w.size(); ++p) r.deviations.emplace_back(w[p], acts[p]);
              set.type2.push_back(std::move(r));
            });
          });
        }
      }
      for (int t = 0; t < static_cast<int>(set.type1.size()); ++t)
        set.index.emplace(set.type1[t].key(), std::make_pair(Rechistory::Kind::TypeI, t));
      for (int t = 0; t < static_cast<int>(set.type2.size()); ++t)
        set.index.emplace(set.type2[t].key(), std::make_pair(Rechistory::Kind::TypeII, t));
      total_ += static_cast<long long>(set.type1.size() + set.type2.size());
      if (total_ > budget)
        throw BudgetExceeded("rechistory enumeration exceeds the configured cap");
    }
  }
}

std::optional<Rechistory> classify(const TreeGame& game, int player, int layer,
                                   int infoset, const std::vector<Action>& b, int K) {
  if (static_cast<int>(b.size()) > layer)
    throw LengthError("rechistory at least as long as the infoset's layer");
  K = std::min(K, game.horizon());
  const Infoset& x = game.infoset(player, layer, infoset);
  std::vector<std::pair<int, Action>> devs;
  for (int k = 0; k < static_cast<int>(b.size()); ++k)
    if (b[k] != x.ancestors[k].second) devs.emplace_back(k, b[k]);

  if (K == 0) {
    if (b.empty()) return Rechistory{Rechistory::Kind::TypeII, 0, {}};
    return std::nullopt;
  }
  int n = static_cast<int>(b.size());
  if (n == layer && static_cast<int>(devs.size()) <= K - 1)
    return Rechistory{Rechistory::Kind::TypeI, layer, devs};
  if (n >= 1 && static_cast<int>(devs.size()) == K && devs.back().first == n - 1)
    return Rechistory{Rechistory::Kind::TypeII, n, devs};
  return std::nullopt;
}

StrategyModification StrategyModification::identity(const RechistoryCache& cache) {
  const TreeGame& game = cache.game();
  int player = cache.player();
  int A = game.num_actions(player);
  StrategyModification phi;
  phi.player = player;
  phi.K = cache.K();
  phi.type1.resize(game.horizon());
  phi.type2.resize(game.horizon());
  std::vector<Action> ident(A);
  for (Action a = 0; a < A; ++a) ident[a] = a;
  for (int l = 0; l < game.horizon(); ++l) {
    phi.type1[l].resize(game.num_infosets(player, l));
    phi.type2[l].resize(game.num_infosets(player, l));
    for (int x = 0; x < game.num_infosets(player, l); ++x) {
      const RechistorySet& set = cache.at(l, x);
      phi.type1[l][x].assign(set.type1.size(), ident);
      phi.type2[l][x].assign(set.type2.size(), 0);
    }
  }
  return phi;
}

std::string StrategyModification::digest() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ULL;
    }
  };
  mix(player);
  mix(K);
  for (const auto& layer : type1)
    for (const auto& x : layer)
      for (const auto& table : x)
        for (Action a : table) mix(static_cast<std::uint64_t>(a) + 1);
  for (const auto& layer : type2)
    for (const auto& x : layer)
      for (Action a : x) mix(static_cast<std::uint64_t>(a) + 0x9e3779b9ULL);
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json StrategyModification::to_json(const RechistoryCache& cache) const {
  const TreeGame& game = cache.game();
  nlohmann::json entries = nlohmann::json::object();
  auto encode = [](const Rechistory& r) {
    std::ostringstream os;
    os << (r.kind == Rechistory::Kind::TypeI ? "I" : "II") << ":" << r.length;
    for (auto& [k, b] : r.deviations) os << ":" << k << "," << b;
    return os.str();
  };
  for (int l = 0; l < game.horizon(); ++l) {
    for (int x = 0; x < game.num_infosets(player, l); ++x) {
      const RechistorySet& set = cache.at(l, x);
      std::string gid = std::to_string(game.global_infoset_id(player, l, x));
      for (std::size_t t = 0; t < set.type1.size(); ++t)
        entries[gid + "|" + encode(set.type1[t])] = type1[l][x][t];
      for (std::size_t t = 0; t < set.type2.size(); ++t)
        entries[gid + "|" + encode(set.type2[t])] = type2[l][x][t];
    }
  }
  return nlohmann::json{{"player", player}, {"K", K}, {"entries", entries}};
}

StrategyModification StrategyModification::from_json(const RechistoryCache& cache,
                                                     const nlohmann::json& j) {
  StrategyModification phi = identity(cache);
  const TreeGame& game = cache.game();
  if (j.at("player").get<int>() != cache.player() ||
      std::min(j.at("K").get<int>(), game.horizon()) != cache.K())
    throw RangeError("modification header mismatch");
  for (const auto& [key, val] : j.at("entries").items()) {
    auto bar = key.find('|');
    auto [l, x] = game.infoset_from_global(phi.player, std::stoi(key.substr(0, bar)));
    std::stringstream ss(key.substr(bar + 1));
    std::string part;
    std::getline(ss, part, ':');
    Rechistory r;
    r.kind = part == "I" ? Rechistory::Kind::TypeI : Rechistory::Kind::TypeII;
    std::getline(ss, part, ':');
    r.length = std::stoi(part);
    while (std::getline(ss, part, ':')) {
      auto comma = part.find(',');
      r.deviations.emplace_back(std::stoi(part.substr(0, comma)),
                                std::stoi(part.substr(comma + 1)));
    }
    const RechistorySet& set = cache.at(l, x);
    if (r.kind == Rechistory::Kind::TypeI)
      phi.type1[l][x][set.lookup_type1(r)] = val.get<std::vector<Action>>();
    else
      phi.type2[l][x][set.lookup_type2(r)] = val.get<Action>();
  }
  return phi;
}

Trajectory execute_modified(const TreeGame& game, const RechistoryCache& cache,
                            const StrategyModification& phi, const ProductPolicy& pi,
                            Rng& rng) {
  int H = game.horizon();
  int m = game.num_players();
  int me = cache.player();
  Trajectory traj;
  traj.states.resize(H);
  traj.joint.resize(H);
  traj.infosets.assign(m, std::vector<int>(H));
  traj.actions.assign(m, std::vector<Action>(H));
  traj.rewards.assign(m, std::vector<double>(H));

  std::vector<Action> observed;
  int s = rng.categorical(game.initial_distribution());
  for (int l = 0; l < H; ++l) {
    const StateNode& node = game.state(l, s);
    traj.states[l] = s;
    std::vector<Action> acts(m);
    for (int i = 0; i < m; ++i) {
      traj.infosets[i][l] = node.infoset[i];
      if (i != me) acts[i] = rng.categorical(pi[i].rows[l][node.infoset[i]]);
    }
    int x = node.infoset[me];
    auto r = classify(game, me, l, x, observed, cache.K());
    if (!r) throw RangeError("execution produced an invalid rechistory");
    const RechistorySet& set = cache.at(l, x);
    if (r->kind == Rechistory::Kind::TypeI) {
      Action rec = rng.categorical(pi[me].rows[l][x]);
      acts[me] = phi.type1[l][x][set.lookup_type1(*r)][rec];
      observed.push_back(rec);
    } else {
      acts[me] = phi.type2[l][x][set.lookup_type2(*r)];
    }
    traj.actions[me][l] = acts[me];
    for (int i = 0; i < m; ++i) traj.actions[i][l] = acts[i];

    int j = game.joint_index(acts);
    traj.joint[l] = j;
    for (int i = 0; i < m; ++i) traj.rewards[i][l] = node.reward[j][i];
    if (l + 1 < H) {
      const auto& row = node.next[j];
      std::vector<double> probs;
      probs.reserve(row.size());
      for (auto& [c, p] : row) probs.push_back(p);
      s = row[rng.categorical(probs)].first;
    }
  }
  return traj;
}

double modified_sequence_form(const TreeGame& game, const RechistoryCache& cache,
                              const StrategyModification& phi,
                              const BehavioralPolicy& pi, int layer, int infoset,
                              Action a) {
  int me = cache.player();
  const Infoset& x = game.infoset(me, layer, infoset);
  const RechistorySet& set = cache.at(layer, infoset);

  // Whether the Type-I prefix steps of `b` take exactly the ancestor actions.
  auto follows_prefix = [&](const std::vector<Action>& b, int upto) {
    Rechistory prefix{Rechistory::Kind::TypeI, 0, {}};
    for (int k = 0; k < upto; ++k) {
      prefix.length = k;
      auto [xk, ak] = x.ancestors[k];
      int idx = cache.at(k, xk).lookup_type1(prefix);
      if (phi.type1[k][xk][idx][b[k]] != ak) return false;
      if (b[k] != ak) prefix.deviations.emplace_back(k, b[k]);
    }
    return true;
  };

  long double total = 0.0;
  for (std::size_t t = 0; t < set.type1.size(); ++t) {
    const Rechistory& r = set.type1[t];
    std::vector<Action> b = r.expand(x);
    if (!follows_prefix(b, layer)) continue;
    double w = 1.0;
    for (int k = 0; k < layer; ++k) w *= pi.prob(k, x.ancestors[k].first, b[k]);
    double last = 0.0;
    for (Action rec = 0; rec < game.num_actions(me); ++rec)
      if (phi.type1[layer][infoset][t][rec] == a) last += pi.prob(layer, infoset, rec);
    total += static_cast<long double>(w) * last;
  }
  for (std::size_t t = 0; t < set.type2.size(); ++t) {
    const Rechistory& r = set.type2[t];
    std::vector<Action> b = r.expand(x);
    if (!follows_prefix(b, r.length)) continue;
    bool ok = true;
    for (int k = r.length; k < layer && ok; ++k) {
      auto [xk, ak] = x.ancestors[k];
      ok = phi.type2[k][xk][cache.at(k, xk).lookup_type2(r)] == ak;
    }
    if (!ok || phi.type2[layer][infoset][t] != a) continue;
    double w = 1.0;
    for (int k = 0; k < r.length; ++k) w *= pi.prob(k, x.ancestors[k].first, b[k]);
    total += w;
  }
  return static_cast<double>(total);
}

}  // namespace kefce
