#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kefce/deviation.hpp"
#include "kefce/game.hpp"
#include "kefce/policy.hpp"

namespace kefce {

struct GapReport {
  double gap = 0.0;
  int player = -1;
  std::vector<double> per_player;
  std::string modification_digest;
  std::optional<StrategyModification> best;

  nlohmann::json to_json() const;
};

// Exact value of (phi o pi_i) x pi_{-i} for the cache's player, by a joint
// traversal over (state, rechistory).
double value_of_modified(const TreeGame& game, const RechistoryCache& cache,
                         const StrategyModification& phi, const ProductPolicy& pi,
                         long long budget = 4'000'000);
double value_of_modified(const TreeGame& game, const RechistoryCache& cache,
                         const StrategyModification& phi, const CorrelatedPolicy& pibar,
                         long long budget = 4'000'000);

// Exact K-EFCE gap by backward induction over (infoset, rechistory) nodes.
GapReport kefce_gap(const TreeGame& game, const CorrelatedPolicy& pibar, int K,
                    long long budget = 4'000'000);

// Exhaustive-search oracle over all strategy modifications.
GapReport kefce_gap_bruteforce(const TreeGame& game, const CorrelatedPolicy& pibar,
                               int K, long long max_modifications = 100'000);

// Exact trigger gap: best (triggering sequence, follow-up policy) deviation.
double trigger_gap(const TreeGame& game, const CorrelatedPolicy& pibar);

// Best fixed deviation policy against the averaged opponents.
double nfcce_gap(const TreeGame& game, const CorrelatedPolicy& pibar);

// Best deviation that observes the full recommended pure policy; requires a
// pure mixture.
double nfce_gap(const TreeGame& game, const CorrelatedPolicy& pibar);

// max_phi sum_t (V^{phi o pi^t} - V^{pi^t}), evaluated with the argmax
// modification re-scored per round.
double kefce_regret(const TreeGame& game, const std::vector<ProductPolicy>& policies,
                    int K, long long budget = 4'000'000);

}  // namespace kefce
