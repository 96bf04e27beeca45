#include "kefce/policy.hpp"

#include <cmath>

#include "kefce/game.hpp"

namespace kefce {

bool BehavioralPolicy::is_pure() const {
  for (const auto& layer : rows)
    for (const auto& row : layer)
      for (double p : row)
        if (p != 0.0 && p != 1.0) return false;
  return true;
}

void CorrelatedPolicy::refresh_purity() {
  pure_mixture = !components.empty();
  for (const auto& comp : components)
    for (const auto& pi : comp) pure_mixture &= pi.is_pure();
}

namespace {

BehavioralPolicy shaped(const TreeGame& game, int player) {
  BehavioralPolicy pi;
  pi.player = player;
  pi.rows.resize(game.horizon());
  for (int l = 0; l < game.horizon(); ++l)
    pi.rows[l].assign(game.num_infosets(player, l),
                      std::vector<double>(game.num_actions(player), 0.0));
  return pi;
}

}  // namespace

BehavioralPolicy uniform_policy(const TreeGame& game, int player) {
  BehavioralPolicy pi = shaped(game, player);
  double u = 1.0 / game.num_actions(player);
  for (auto& layer : pi.rows)
    for (auto& row : layer) std::fill(row.begin(), row.end(), u);
  return pi;
}

ProductPolicy uniform_product(const TreeGame& game) {
  ProductPolicy pi;
  for (int i = 0; i < game.num_players(); ++i) pi.push_back(uniform_policy(game, i));
  return pi;
}

BehavioralPolicy pure_policy(const TreeGame& game, int player,
                             const std::vector<std::vector<int>>& actions) {
  BehavioralPolicy pi = shaped(game, player);
  for (int l = 0; l < game.horizon(); ++l)
    for (int x = 0; x < game.num_infosets(player, l); ++x)
      pi.rows[l][x][actions[l][x]] = 1.0;
  return pi;
}

BehavioralPolicy random_policy(const TreeGame& game, int player, Rng& rng) {
  BehavioralPolicy pi = shaped(game, player);
  for (auto& layer : pi.rows) {
    for (auto& row : layer) {
      double sum = 0.0;
      for (double& p : row) {
        p = 0.05 + rng.uniform();
        sum += p;
      }
      for (double& p : row) p /= sum;
    }
  }
  return pi;
}

BehavioralPolicy random_pure_policy(const TreeGame& game, int player, Rng& rng) {
  BehavioralPolicy pi = shaped(game, player);
  for (auto& layer : pi.rows)
    for (auto& row : layer)
      row[static_cast<int>(rng.uniform() * row.size())] = 1.0;
  return pi;
}

void check_policy(const TreeGame& game, const BehavioralPolicy& pi) {
  if (static_cast<int>(pi.rows.size()) != game.horizon())
    throw RangeError("policy layer count mismatch");
  for (int l = 0; l < game.horizon(); ++l) {
    if (static_cast<int>(pi.rows[l].size()) != game.num_infosets(pi.player, l))
      throw RangeError("policy infoset count mismatch");
    for (const auto& row : pi.rows[l]) {
      if (static_cast<int>(row.size()) != game.num_actions(pi.player))
        throw RangeError("policy action count mismatch");
      double sum = 0.0;
      for (double p : row) {
        if (p < 0.0) throw RangeError("negative action probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12) throw RangeError("policy row does not sum to 1");
    }
  }
}

BalancedPolicySet balanced_policy_set(const TreeGame& game, int player) {
  BalancedPolicySet set;
  set.player = player;
  int A = game.num_actions(player);
  for (int target = 0; target < game.horizon(); ++target) {
    BehavioralPolicy pi = shaped(game, player);
    for (int l = 0; l < game.horizon(); ++l) {
      for (int idx = 0; idx < game.num_infosets(player, l); ++idx) {
        auto& row = pi.rows[l][idx];
        if (l >= target) {
          std::fill(row.begin(), row.end(), 1.0 / A);
          continue;
        }
        const Infoset& x = game.infoset(player, l, idx);
        int total = x.child_total[target];
        if (total == 0) {
          // No descendants at the target layer; the row never matters there.
          std::fill(row.begin(), row.end(), 1.0 / A);
          continue;
        }
        for (Action a = 0; a < A; ++a)
          row[a] = static_cast<double>(x.child_count[target][a]) / total;
      }
    }
    set.policies.push_back(std::move(pi));
  }
  return set;
}

double balanced_transition(const TreeGame& game, const BalancedPolicySet& set,
                           int layer, int infoset) {
  int player = set.player;
  double x_count = game.num_infosets(player, layer);
  if (layer == 0) return 1.0 / x_count;
  const Infoset& x = game.infoset(player, layer, infoset);
  const auto& anc = x.ancestors;
  double p = game.infoset(player, 0, anc[0].first).child_total[layer] / x_count;
  for (int k = 0; k < layer; ++k) {
    const Infoset& xk = game.infoset(player, k, anc[k].first);
    double down = k + 1 < layer
                      ? game.infoset(player, k + 1, anc[k + 1].first).child_total[layer]
                      : 1.0;
    p *= down / xk.child_count[layer][anc[k].second];
  }
  return p;
}

const ProductPolicy& sample_component(const CorrelatedPolicy& pibar, Rng& rng) {
  if (pibar.components.empty()) throw EmptyMixture("correlated policy has no components");
  return pibar.components[rng.categorical(pibar.weights)];
}

nlohmann::json policy_to_json(const TreeGame& game, const BehavioralPolicy& pi) {
  nlohmann::json rows = nlohmann::json::object();
  for (int l = 0; l < game.horizon(); ++l)
    for (int x = 0; x < game.num_infosets(pi.player, l); ++x)
      rows[std::to_string(game.global_infoset_id(pi.player, l, x))] = pi.rows[l][x];
  return nlohmann::json{{"player", pi.player}, {"rows", rows}};
}

BehavioralPolicy policy_from_json(const TreeGame& game, const nlohmann::json& j) {
  int player = j.at("player").get<int>();
  BehavioralPolicy pi = shaped(game, player);
  for (const auto& [key, val] : j.at("rows").items()) {
    auto [l, x] = game.infoset_from_global(player, std::stoi(key));
    pi.rows[l][x] = val.get<std::vector<double>>();
  }
  check_policy(game, pi);
  return pi;
}

nlohmann::json correlated_to_json(const TreeGame& game, const CorrelatedPolicy& pibar) {
  nlohmann::json comps = nlohmann::json::array();
  for (int t = 0; t < pibar.size(); ++t) {
    nlohmann::json policies = nlohmann::json::array();
    for (const auto& pi : pibar.components[t]) policies.push_back(policy_to_json(game, pi));
    comps.push_back(nlohmann::json{{"weight", pibar.weights[t]}, {"policies", policies}});
  }
  return nlohmann::json{{"components", comps}};
}

CorrelatedPolicy correlated_from_json(const TreeGame& game, const nlohmann::json& j) {
  CorrelatedPolicy pibar;
  if (j.contains("components")) {
    for (const auto& comp : j.at("components")) {
      pibar.weights.push_back(comp.at("weight").get<double>());
      ProductPolicy prod;
      for (const auto& pj : comp.at("policies")) prod.push_back(policy_from_json(game, pj));
      pibar.components.push_back(std::move(prod));
    }
  } else {
    // A bare product policy file is accepted as a one-component mixture.
    pibar.weights.push_back(1.0);
    ProductPolicy prod;
    for (const auto& pj : j.at("policies")) prod.push_back(policy_from_json(game, pj));
    pibar.components.push_back(std::move(prod));
  }
  if (pibar.components.empty()) throw EmptyMixture("no mixture components");
  double sum = 0.0;
  for (double w : pibar.weights) sum += w;
  if (std::abs(sum - 1.0) > 1e-9) throw RangeError("mixture weights do not sum to 1");
  pibar.refresh_purity();
  return pibar;
}

}  // namespace kefce
