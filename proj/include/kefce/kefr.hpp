#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "kefce/deviation.hpp"
#include "kefce/game.hpp"
#include "kefce/policy.hpp"
#include "kefce/regret.hpp"

namespace kefce {

double binomial(int n, int k);

struct RateOptions {
  std::optional<double> eta;  // per-experiment override; default is the closed form
};

// Full-feedback learning rate.
double learning_rate_full(int horizon, int K, long long num_infosets, int num_actions,
                          long long rounds);

struct BanditRate {
  double eta = 0.0;
  double loss_cap = 0.0;
};
// Bandit-feedback learning rate and loss cap; `sum_xa` is the sum over players
// of (infoset count x action count) entering the log factor.
BanditRate learning_rate_bandit(int horizon, int K, long long num_infosets,
                                int num_actions, double sum_xa, long long rounds,
                                double failure_prob);

// Episodes one player's sampling pass plays per round.
long long episodes_per_round(int horizon, int K);

// Loss estimates aligned with a RechistoryCache's enumeration order.
struct LossEstimates {
  std::vector<std::vector<std::vector<std::vector<double>>>> type1;  // [layer][x][r][A]
  std::vector<std::vector<std::vector<std::vector<double>>>> type2;  // [layer][x][r][A]
};

LossEstimates typeI_estimates(const TreeGame& game, const RechistoryCache& cache,
                              const BalancedPolicySet& balanced, const ProductPolicy& pi,
                              Rng& rng, long long* episode_counter = nullptr);
LossEstimates typeII_estimates(const TreeGame& game, const RechistoryCache& cache,
                               const BalancedPolicySet& balanced, const ProductPolicy& pi,
                               Rng& rng, long long* episode_counter = nullptr);

struct FullRunResult {
  std::vector<ProductPolicy> policies;  // one product policy per round
};
// Self-play K-EFR under full feedback. Deterministic.
FullRunResult run_kefr_full(const TreeGame& game, int K, long long rounds,
                            const RateOptions& rates = {});

struct BanditRunResult {
  std::vector<ProductPolicy> policies;
  long long episodes = 0;
};
// Self-play Balanced K-EFR under bandit feedback. Deterministic given the seed.
BanditRunResult run_kefr_bandit(const TreeGame& game, int K, long long rounds,
                                double failure_prob, std::uint64_t seed,
                                const RateOptions& rates = {});

// Time-selection values for the minimizer at (layer, infoset): Type-I entries
// then Type-II entries in cache order. Full feedback uses the recommendation
// products alone; bandit mode multiplies in the balanced weights.
std::vector<double> recommendation_products(const TreeGame& game,
                                            const RechistoryCache& cache,
                                            const BehavioralPolicy& pi, int layer,
                                            int infoset);
std::vector<double> balanced_weights(const TreeGame& game, const RechistoryCache& cache,
                                     const BalancedPolicySet& balanced, int layer,
                                     int infoset);

}  // namespace kefce
