#include "kefce/game.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <sstream>

namespace kefce {
namespace {

constexpr double kProbTol = 1e-12;

std::string joint_key(const TreeGame& game, int joint) {
  std::string key;
  for (int i = 0; i < game.num_players(); ++i) {
    if (i > 0) key += ',';
    key += std::to_string(game.joint_component(joint, i));
  }
  return key;
}

int parse_joint_key(const std::string& key, std::span<const int> action_counts,
                    std::span<const int> strides) {
  std::stringstream ss(key);
  std::string part;
  int joint = 0;
  std::size_t i = 0;
  while (std::getline(ss, part, ',')) {
    if (i >= action_counts.size()) throw TreeViolation("joint action key has too many parts: " + key);
    int a = std::stoi(part);
    if (a < 0 || a >= action_counts[i]) throw TreeViolation("action out of range in key: " + key);
    joint += a * strides[i];
    ++i;
  }
  if (i != action_counts.size()) throw TreeViolation("joint action key has too few parts: " + key);
  return joint;
}

struct Fnv1a {
  std::uint64_t h = 1469598103934665603ULL;
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
};

}  // namespace

std::pair<int, int> TreeGame::infoset_from_global(int player, int id) const {
  for (int l = horizon_ - 1; l >= 0; --l) {
    if (id >= infoset_offset_[player][l]) return {l, id - infoset_offset_[player][l]};
  }
  throw RangeError("bad global infoset id");
}

TreeGame TreeGame::validate(const nlohmann::json& spec) {
  TreeGame g;
  g.num_players_ = spec.at("players").get<int>();
  g.horizon_ = spec.at("horizon").get<int>();
  if (g.num_players_ < 1) throw TreeViolation("players must be >= 1");
  if (g.horizon_ < 1) throw TreeViolation("horizon must be >= 1");
  g.num_actions_ = spec.at("action_counts").get<std::vector<int>>();
  if (static_cast<int>(g.num_actions_.size()) != g.num_players_)
    throw TreeViolation("action_counts size mismatch");
  g.joint_stride_.assign(g.num_players_, 1);
  g.num_joint_ = 1;
  for (int i = 0; i < g.num_players_; ++i) {
    if (g.num_actions_[i] < 1) throw TreeViolation("action count must be >= 1");
    g.joint_stride_[i] = g.num_joint_;
    g.num_joint_ *= g.num_actions_[i];
  }

  const auto& layers = spec.at("states");
  if (static_cast<int>(layers.size()) != g.horizon_)
    throw TreeViolation("states must list exactly `horizon` layers");

  std::vector<std::vector<std::vector<int>>> labels(g.num_players_);
  g.layers_.resize(g.horizon_);
  for (int l = 0; l < g.horizon_; ++l) {
    int n = static_cast<int>(layers[l].size());
    if (n < 1) throw TreeViolation("empty layer " + std::to_string(l));
    g.layers_[l].resize(n);
    for (int i = 0; i < g.num_players_; ++i) labels[i].emplace_back(n);
  }

  for (int l = 0; l < g.horizon_; ++l) {
    for (int k = 0; k < g.num_states(l); ++k) {
      const auto& js = layers[l][k];
      StateNode& s = g.layers_[l][k];
      auto info = js.at("infoset").get<std::vector<int>>();
      if (static_cast<int>(info.size()) != g.num_players_)
        throw TreeViolation("infoset label list size mismatch");
      s.infoset.resize(g.num_players_);
      for (int i = 0; i < g.num_players_; ++i) labels[i][l][k] = info[i];

      s.reward.assign(g.num_joint_, std::vector<double>(g.num_players_, 0.0));
      if (js.contains("rewards")) {
        for (const auto& [key, val] : js.at("rewards").items()) {
          int j = parse_joint_key(key, g.num_actions_, g.joint_stride_);
          auto r = val.get<std::vector<double>>();
          if (static_cast<int>(r.size()) != g.num_players_)
            throw RewardRange("reward vector size mismatch");
          for (int i = 0; i < g.num_players_; ++i) {
            if (!(r[i] >= 0.0 && r[i] <= 1.0))
              throw RewardRange("reward outside [0,1] at layer " + std::to_string(l));
            s.reward[j][i] = r[i];
          }
        }
      }

      if (l + 1 < g.horizon_) {
        s.next.assign(g.num_joint_, {});
        if (!js.contains("next")) throw StochasticityError("missing transitions at non-final layer");
        const auto& nx = js.at("next");
        for (int j = 0; j < g.num_joint_; ++j) {
          std::string key = joint_key(g, j);
          if (!nx.contains(key))
            throw StochasticityError("missing transition row for joint action " + key);
          const auto& row = nx.at(key);
          double sum = 0.0;
          if (row.is_number_integer()) {
            s.next[j].emplace_back(row.get<int>(), 1.0);
            sum = 1.0;
          } else {
            for (const auto& [tk, tv] : row.items()) {
              double p = tv.get<double>();
              if (p < 0.0) throw StochasticityError("negative transition probability");
              s.next[j].emplace_back(std::stoi(tk), p);
              sum += p;
            }
            std::sort(s.next[j].begin(), s.next[j].end());
          }
          if (std::abs(sum - 1.0) > kProbTol)
            throw StochasticityError("transition row does not sum to 1");
          for (auto& [c, p] : s.next[j]) {
            if (c < 0 || c >= g.num_states(l + 1))
              throw TreeViolation("transition target out of range");
          }
        }
      }
    }
  }

  g.initial_ = spec.at("initial").get<std::vector<double>>();
  if (static_cast<int>(g.initial_.size()) != g.num_states(0))
    throw TreeViolation("initial distribution size mismatch");
  double p0sum = 0.0;
  for (double p : g.initial_) {
    if (p < 0.0) throw StochasticityError("negative initial probability");
    p0sum += p;
  }
  if (std::abs(p0sum - 1.0) > kProbTol) throw StochasticityError("initial distribution does not sum to 1");

  // Tree structure: every non-root state has exactly one (parent, joint) edge.
  for (int l = 0; l + 1 < g.horizon_; ++l) {
    std::vector<int> seen(g.num_states(l + 1), 0);
    for (int k = 0; k < g.num_states(l); ++k) {
      for (int j = 0; j < g.num_joint_; ++j) {
        for (auto& [c, p] : g.layers_[l][k].next[j]) {
          if (seen[c]++) throw TreeViolation("state with two parents at layer " + std::to_string(l + 1));
          g.layers_[l + 1][c].parent_state = k;
          g.layers_[l + 1][c].parent_joint = j;
          g.layers_[l + 1][c].parent_prob = p;
        }
      }
    }
    for (int c = 0; c < g.num_states(l + 1); ++c) {
      if (!seen[c]) throw TreeViolation("unreachable state at layer " + std::to_string(l + 1));
    }
  }

  g.build_infosets(labels);
  g.precompute();
  return g;
}

void TreeGame::build_infosets(const std::vector<std::vector<std::vector<int>>>& labels) {
  infosets_.assign(num_players_, {});
  infoset_offset_.assign(num_players_, std::vector<int>(horizon_, 0));
  total_infosets_.assign(num_players_, 0);

  for (int i = 0; i < num_players_; ++i) {
    infosets_[i].resize(horizon_);
    // Per-state (infoset, action) history of player i, built layer by layer.
    std::vector<std::vector<std::pair<int, Action>>> path(num_states(0));
    for (int l = 0; l < horizon_; ++l) {
      std::map<int, int> dense;
      auto& sets = infosets_[i][l];
      for (int k = 0; k < num_states(l); ++k) {
        int label = labels[i][l][k];
        auto [it, inserted] = dense.emplace(label, static_cast<int>(sets.size()));
        if (inserted) sets.emplace_back();
        int idx = it->second;
        layers_[l][k].infoset[i] = idx;
        sets[idx].states.push_back(k);
      }
      if (l > 0) {
        std::vector<std::vector<std::pair<int, Action>>> next_path(num_states(l));
        for (int k = 0; k < num_states(l); ++k) {
          const StateNode& s = layers_[l][k];
          const StateNode& parent = layers_[l - 1][s.parent_state];
          next_path[k] = path[s.parent_state];
          next_path[k].emplace_back(parent.infoset[i], joint_component(s.parent_joint, i));
        }
        path = std::move(next_path);
      }
      for (auto& x : sets) {
        x.ancestors = path[x.states.front()];
        for (int k : x.states) {
          if (path[k] != x.ancestors)
            throw RecallViolation("infoset mixing distinct histories (player " +
                                  std::to_string(i) + ", layer " + std::to_string(l) + ")");
        }
      }
    }
    for (int l = 0; l < horizon_; ++l) {
      infoset_offset_[i][l] = total_infosets_[i];
      total_infosets_[i] += num_infosets(i, l);
    }
  }
}

void TreeGame::precompute() {
  // Descendant counts and immediate children over each player's infoset tree.
  for (int i = 0; i < num_players_; ++i) {
    int A = num_actions_[i];
    for (int l = 0; l < horizon_; ++l) {
      for (auto& x : infosets_[i][l]) {
        x.children.assign(A, {});
        x.child_count.assign(horizon_, std::vector<int>(A, 0));
        x.child_total.assign(horizon_, 0);
        x.child_total[l] = 1;
      }
    }
    for (int l = 1; l < horizon_; ++l) {
      for (int idx = 0; idx < num_infosets(i, l); ++idx) {
        const auto& anc = infosets_[i][l][idx].ancestors;
        for (int k = 0; k < l; ++k) {
          auto [xk, ak] = anc[k];
          Infoset& up = infosets_[i][k][xk];
          up.child_count[l][ak] += 1;
          up.child_total[l] += 1;
          if (k == l - 1) up.children[ak].push_back(idx);
        }
      }
    }
  }

  env_reach_.resize(horizon_);
  env_reach_[0] = initial_;
  for (int l = 1; l < horizon_; ++l) {
    env_reach_[l].resize(num_states(l));
    for (int k = 0; k < num_states(l); ++k) {
      const StateNode& s = layers_[l][k];
      env_reach_[l][k] = env_reach_[l - 1][s.parent_state] * s.parent_prob;
    }
  }
}

std::string TreeGame::digest() const {
  Fnv1a f;
  f.u64(static_cast<std::uint64_t>(num_players_));
  f.u64(static_cast<std::uint64_t>(horizon_));
  for (int a : num_actions_) f.u64(static_cast<std::uint64_t>(a));
  for (double p : initial_) f.f64(p);
  for (int l = 0; l < horizon_; ++l) {
    f.u64(static_cast<std::uint64_t>(num_states(l)));
    for (const auto& s : layers_[l]) {
      for (int id : s.infoset) f.u64(static_cast<std::uint64_t>(id));
      for (const auto& row : s.reward)
        for (double r : row) f.f64(r);
      for (const auto& row : s.next) {
        f.u64(row.size());
        for (auto& [c, p] : row) {
          f.u64(static_cast<std::uint64_t>(c));
          f.f64(p);
        }
      }
    }
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(f.h));
  return buf;
}

nlohmann::json TreeGame::summary() const {
  nlohmann::json j;
  j["players"] = num_players_;
  j["horizon"] = horizon_;
  std::vector<int> states_per_layer;
  for (int l = 0; l < horizon_; ++l) states_per_layer.push_back(num_states(l));
  j["states_per_layer"] = states_per_layer;
  std::vector<std::vector<int>> infosets_per_layer(num_players_);
  for (int i = 0; i < num_players_; ++i)
    for (int l = 0; l < horizon_; ++l) infosets_per_layer[i].push_back(num_infosets(i, l));
  j["infosets_per_layer"] = infosets_per_layer;
  j["digest"] = digest();
  return j;
}

nlohmann::json TreeGame::to_json() const {
  nlohmann::json j;
  j["players"] = num_players_;
  j["horizon"] = horizon_;
  j["action_counts"] = num_actions_;
  j["initial"] = initial_;
  nlohmann::json jl = nlohmann::json::array();
  for (int l = 0; l < horizon_; ++l) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& s : layers_[l]) {
      nlohmann::json js;
      js["infoset"] = s.infoset;
      nlohmann::json rw = nlohmann::json::object();
      for (int jnt = 0; jnt < num_joint_; ++jnt) {
        bool any = false;
        for (double r : s.reward[jnt]) any |= (r != 0.0);
        if (any) rw[joint_key(*this, jnt)] = s.reward[jnt];
      }
      if (!rw.empty()) js["rewards"] = rw;
      if (l + 1 < horizon_) {
        nlohmann::json nx = nlohmann::json::object();
        for (int jnt = 0; jnt < num_joint_; ++jnt) {
          if (s.next[jnt].size() == 1 && s.next[jnt][0].second == 1.0) {
            nx[joint_key(*this, jnt)] = s.next[jnt][0].first;
          } else {
            nlohmann::json dist = nlohmann::json::object();
            for (auto& [c, p] : s.next[jnt]) dist[std::to_string(c)] = p;
            nx[joint_key(*this, jnt)] = dist;
          }
        }
        js["next"] = nx;
      }
      row.push_back(std::move(js));
    }
    jl.push_back(std::move(row));
  }
  j["states"] = jl;
  return j;
}

double sequence_form_policy_range(const TreeGame& game, const BehavioralPolicy& pi,
                                  int from_layer, int layer, int infoset, Action a) {
  const Infoset& x = game.infoset(pi.player, layer, infoset);
  double p = pi.prob(layer, infoset, a);
  for (int k = std::max(from_layer, 0); k < layer; ++k)
    p *= pi.prob(k, x.ancestors[k].first, x.ancestors[k].second);
  return p;
}

double sequence_form_policy(const TreeGame& game, const BehavioralPolicy& pi,
                            int layer, int infoset, Action a) {
  return sequence_form_policy_range(game, pi, 0, layer, infoset, a);
}

namespace {

// Forward pass of p^{pi_{-i}}_{1:l+1}(s): environment and opponents only.
std::vector<std::vector<double>> opponent_reach(const TreeGame& game,
                                                const ProductPolicy& pi, int player) {
  std::vector<std::vector<double>> reach(game.horizon());
  reach[0] = game.initial_distribution();
  for (int l = 0; l + 1 < game.horizon(); ++l) {
    reach[l + 1].assign(game.num_states(l + 1), 0.0);
    for (int k = 0; k < game.num_states(l); ++k) {
      const StateNode& s = game.state(l, k);
      if (reach[l][k] == 0.0) continue;
      for (int j = 0; j < game.num_joint_actions(); ++j) {
        double w = reach[l][k];
        for (int p = 0; p < game.num_players(); ++p) {
          if (p == player) continue;
          w *= pi[p].prob(l, s.infoset[p], game.joint_component(j, p));
        }
        if (w == 0.0) continue;
        for (auto& [c, pr] : s.next[j]) reach[l + 1][c] += w * pr;
      }
    }
  }
  return reach;
}

}  // namespace

double marginal_reach(const TreeGame& game, const ProductPolicy& pi, int player,
                      int layer, int infoset) {
  auto reach = opponent_reach(game, pi, player);
  double total = 0.0;
  for (int k : game.infoset(player, layer, infoset).states) total += reach[layer][k];
  return total;
}

double value(const TreeGame& game, const ProductPolicy& pi, int player) {
  std::vector<double> reach = game.initial_distribution();
  long double v = 0.0;
  for (int l = 0; l < game.horizon(); ++l) {
    std::vector<double> next;
    if (l + 1 < game.horizon()) next.assign(game.num_states(l + 1), 0.0);
    for (int k = 0; k < game.num_states(l); ++k) {
      const StateNode& s = game.state(l, k);
      if (reach[k] == 0.0) continue;
      for (int j = 0; j < game.num_joint_actions(); ++j) {
        double w = reach[k];
        for (int p = 0; p < game.num_players(); ++p)
          w *= pi[p].prob(l, s.infoset[p], game.joint_component(j, p));
        if (w == 0.0) continue;
        v += static_cast<long double>(w) * s.reward[j][player];
        if (l + 1 < game.horizon())
          for (auto& [c, pr] : s.next[j]) next[c] += w * pr;
      }
    }
    if (l + 1 < game.horizon()) reach = std::move(next);
  }
  return static_cast<double>(v);
}

double value(const TreeGame& game, const CorrelatedPolicy& pibar, int player) {
  long double v = 0.0;
  for (int t = 0; t < pibar.size(); ++t)
    v += static_cast<long double>(pibar.weights[t]) * value(game, pibar.components[t], player);
  return static_cast<double>(v);
}

LossTable counterfactual_losses(const TreeGame& game, const ProductPolicy& pi,
                                int player) {
  int H = game.horizon();
  int A = game.num_actions(player);
  LossTable table;
  table.immediate.resize(H);
  table.cumulative.resize(H);
  for (int l = 0; l < H; ++l) {
    table.immediate[l].assign(game.num_infosets(player, l), std::vector<double>(A, 0.0));
    table.cumulative[l].assign(game.num_infosets(player, l), std::vector<double>(A, 0.0));
  }

  auto reach = opponent_reach(game, pi, player);
  for (int l = 0; l < H; ++l) {
    for (int k = 0; k < game.num_states(l); ++k) {
      const StateNode& s = game.state(l, k);
      if (reach[l][k] == 0.0) continue;
      for (int j = 0; j < game.num_joint_actions(); ++j) {
        double w = reach[l][k];
        for (int p = 0; p < game.num_players(); ++p) {
          if (p == player) continue;
          w *= pi[p].prob(l, s.infoset[p], game.joint_component(j, p));
        }
        if (w == 0.0) continue;
        Action a = game.joint_component(j, player);
        table.immediate[l][s.infoset[player]][a] += w * (1.0 - s.reward[j][player]);
      }
    }
  }

  for (int l = H - 1; l >= 0; --l) {
    for (int idx = 0; idx < game.num_infosets(player, l); ++idx) {
      const Infoset& x = game.infoset(player, l, idx);
      for (Action a = 0; a < A; ++a) {
        double total = table.immediate[l][idx][a];
        if (l + 1 < H) {
          for (int child : x.children[a]) {
            double cont = 0.0;
            for (Action a2 = 0; a2 < A; ++a2)
              cont += pi[player].prob(l + 1, child, a2) * table.cumulative[l + 1][child][a2];
            total += cont;
          }
        }
        table.cumulative[l][idx][a] = total;
      }
    }
  }
  return table;
}

Trajectory play_episode(const TreeGame& game, const ProductPolicy& pi, Rng& rng) {
  int H = game.horizon();
  int m = game.num_players();
  Trajectory traj;
  traj.states.resize(H);
  traj.joint.resize(H);
  traj.infosets.assign(m, std::vector<int>(H));
  traj.actions.assign(m, std::vector<Action>(H));
  traj.rewards.assign(m, std::vector<double>(H));

  int s = rng.categorical(game.initial_distribution());
  for (int l = 0; l < H; ++l) {
    const StateNode& node = game.state(l, s);
    traj.states[l] = s;
    std::vector<Action> acts(m);
    for (int i = 0; i < m; ++i) {
      traj.infosets[i][l] = node.infoset[i];
      acts[i] = rng.categorical(pi[i].rows[l][node.infoset[i]]);
      traj.actions[i][l] = acts[i];
    }
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

}  // namespace kefce
