#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "kefce/errors.hpp"
#include "kefce/rng.hpp"

namespace kefce {

class TreeGame;

// Per-infoset action distributions for one player, indexed [layer][infoset].
struct BehavioralPolicy {
  int player = 0;
  std::vector<std::vector<std::vector<double>>> rows;

  double prob(int layer, int infoset, int action) const {
    return rows[layer][infoset][action];
  }
  bool is_pure() const;
};

// One policy per player.
using ProductPolicy = std::vector<BehavioralPolicy>;

// Finite mixture of product policies. `pure_mixture` is set when every
// component policy is deterministic.
struct CorrelatedPolicy {
  std::vector<double> weights;
  std::vector<ProductPolicy> components;
  bool pure_mixture = false;

  int size() const { return static_cast<int>(components.size()); }
  void refresh_purity();
};

// H balanced exploration policies of one player, indexed by target layer
// (0-based): policies[h] plays descendant-count ratios before layer h and
// uniform from layer h on.
struct BalancedPolicySet {
  int player = 0;
  std::vector<BehavioralPolicy> policies;
};

BehavioralPolicy uniform_policy(const TreeGame& game, int player);
ProductPolicy uniform_product(const TreeGame& game);
// One-hot rows; actions[layer][infoset] gives the action taken.
BehavioralPolicy pure_policy(const TreeGame& game, int player,
                             const std::vector<std::vector<int>>& actions);
BehavioralPolicy random_policy(const TreeGame& game, int player, Rng& rng);
BehavioralPolicy random_pure_policy(const TreeGame& game, int player, Rng& rng);

// Row sums within 1e-12 of one, entries nonnegative, shapes matching the game.
void check_policy(const TreeGame& game, const BehavioralPolicy& pi);

BalancedPolicySet balanced_policy_set(const TreeGame& game, int player);

// Sequence form p^{*,h}_{i,1:h}(x_h) of the balanced transitions for target
// layer `layer` (0-based), evaluated at an infoset of that layer.
double balanced_transition(const TreeGame& game, const BalancedPolicySet& set,
                           int layer, int infoset);

const ProductPolicy& sample_component(const CorrelatedPolicy& pibar, Rng& rng);

nlohmann::json policy_to_json(const TreeGame& game, const BehavioralPolicy& pi);
BehavioralPolicy policy_from_json(const TreeGame& game, const nlohmann::json& j);
nlohmann::json correlated_to_json(const TreeGame& game, const CorrelatedPolicy& pibar);
CorrelatedPolicy correlated_from_json(const TreeGame& game, const nlohmann::json& j);

}  // namespace kefce
