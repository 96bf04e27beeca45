#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kefce/errors.hpp"
#include "kefce/policy.hpp"
#include "kefce/rng.hpp"

namespace kefce {

using Action = int;

// One state of the underlying tree. Layers are 0-based internally; a state at
// layer l > 0 has exactly one (parent state, joint action) predecessor.
struct StateNode {
  int parent_state = -1;
  int parent_joint = -1;
  double parent_prob = 1.0;
  std::vector<int> infoset;  // per player: infoset index within (player, layer)
  // Per joint action: transition distribution over next-layer state indices.
  std::vector<std::vector<std::pair<int, double>>> next;
  std::vector<std::vector<double>> reward;  // [joint][player], in [0, 1]
};

// One infoset of one player, with its precomputed ancestor sequence and
// descendant-count tables over the player's own tree.
struct Infoset {
  std::vector<int> states;  // member state indices within the layer
  // (infoset index at layer k, action a_k) for k = 0 .. layer-1.
  std::vector<std::pair<int, Action>> ancestors;
  // children[a]: immediate child infoset indices at layer+1.
  std::vector<std::vector<int>> children;
  // child_count[l][a] = |C_l(x, a)| and child_total[l] = |C_l(x)| for layers
  // l > this infoset's layer; child_total[own layer] = 1 by convention.
  std::vector<std::vector<int>> child_count;
  std::vector<int> child_total;
};

// Player view of one episode plus the underlying state path.
struct Trajectory {
  std::vector<int> states;                       // [layer]
  std::vector<int> joint;                        // [layer]
  std::vector<std::vector<int>> infosets;        // [player][layer]
  std::vector<std::vector<Action>> actions;      // [player][layer]
  std::vector<std::vector<double>> rewards;      // [player][layer]
};

// Per-(infoset, action) counterfactual losses of one player: `immediate` holds
// the one-step losses and `cumulative` the loss-to-go conditioned on reaching
// the pair.
struct LossTable {
  std::vector<std::vector<std::vector<double>>> immediate;   // [layer][x][a]
  std::vector<std::vector<std::vector<double>>> cumulative;  // [layer][x][a]
};

// Validated m-player tree game with perfect recall. Immutable after
// construction and safe to share across threads.
class TreeGame {
 public:
  int num_players() const { return num_players_; }
  int horizon() const { return horizon_; }
  int num_actions(int player) const { return num_actions_[player]; }
  int num_joint_actions() const { return num_joint_; }

  Action joint_component(int joint, int player) const {
    return (joint / joint_stride_[player]) % num_actions_[player];
  }
  int joint_index(std::span<const Action> actions) const {
    int j = 0;
    for (int i = 0; i < num_players_; ++i) j += actions[i] * joint_stride_[i];
    return j;
  }

  int num_states(int layer) const { return static_cast<int>(layers_[layer].size()); }
  const StateNode& state(int layer, int idx) const { return layers_[layer][idx]; }
  const std::vector<double>& initial_distribution() const { return initial_; }

  int num_infosets(int player, int layer) const {
    return static_cast<int>(infosets_[player][layer].size());
  }
  int num_infosets(int player) const { return total_infosets_[player]; }
  const Infoset& infoset(int player, int layer, int idx) const {
    return infosets_[player][layer][idx];
  }
  // Dense per-player infoset id, layer-major.
  int global_infoset_id(int player, int layer, int idx) const {
    return infoset_offset_[player][layer] + idx;
  }
  std::pair<int, int> infoset_from_global(int player, int id) const;

  // Environment part of the reach probability, p_{1:h}(s).
  double env_reach(int layer, int state) const { return env_reach_[layer][state]; }

  std::string digest() const;
  nlohmann::json summary() const;
  nlohmann::json to_json() const;

  // Parses and validates an external game description. Throws TreeViolation,
  // RecallViolation, StochasticityError or RewardRange.
  static TreeGame validate(const nlohmann::json& spec);

 private:
  TreeGame() = default;
  void build_infosets(const std::vector<std::vector<std::vector<int>>>& labels);
  void precompute();

  int num_players_ = 0;
  int horizon_ = 0;
  int num_joint_ = 1;
  std::vector<int> num_actions_;
  std::vector<int> joint_stride_;
  std::vector<double> initial_;
  std::vector<std::vector<StateNode>> layers_;
  std::vector<std::vector<std::vector<Infoset>>> infosets_;  // [player][layer][idx]
  std::vector<std::vector<int>> infoset_offset_;             // [player][layer]
  std::vector<int> total_infosets_;
  std::vector<std::vector<double>> env_reach_;
};

// Sequence-form policy pi_{i,1:h}(x_h, a_h): product of the player's action
// probabilities along the unique ancestor sequence, ending with (x_h, a_h).
double sequence_form_policy(const TreeGame& game, const BehavioralPolicy& pi,
                            int layer, int infoset, Action a);
// Sub-range product pi_{i,from:h} along the same sequence (`from` 0-based;
// the factor at `layer` is pi(a | x_h)).
double sequence_form_policy_range(const TreeGame& game, const BehavioralPolicy& pi,
                                  int from_layer, int layer, int infoset, Action a);

// Marginal reach probability p^{pi_{-i}}_{1:h}(x_h): environment and all
// opponents, the player's own actions excluded.
double marginal_reach(const TreeGame& game, const ProductPolicy& pi, int player,
                      int layer, int infoset);

// Exact expected cumulative reward of `player` under the product policy.
double value(const TreeGame& game, const ProductPolicy& pi, int player);
double value(const TreeGame& game, const CorrelatedPolicy& pibar, int player);

// Exact counterfactual losses of `player` for one round.
LossTable counterfactual_losses(const TreeGame& game, const ProductPolicy& pi,
                                int player);

// Samples one episode of the product policy.
Trajectory play_episode(const TreeGame& game, const ProductPolicy& pi, Rng& rng);

}  // namespace kefce
