#pragma once

#include <span>
#include <vector>

#include "kefce/errors.hpp"

namespace kefce {

// All maps [A] -> [A] (the swap modification set), materialized in
// lexicographic order. Rejects A > 8.
std::vector<std::vector<int>> all_swap_maps(int num_actions);

// Stationary row vector of a row-stochastic matrix: p^T = p^T Q, found by
// power iteration from the uniform distribution. The returned p satisfies
// ||p^T (Q - I)||_1 <= residual_tol.
std::vector<double> stationary_distribution(const std::vector<std::vector<double>>& Q,
                                            double residual_tol = 1e-10,
                                            long long max_iters = 100000);

// One WRHedge / SWRHedge instance: exponential weights over
// (time-selection index, modification) pairs with the delayed update and the
// fixed-point recommendation. Swap indices come first, then external ones.
class WideRangeMinimizer {
 public:
  enum class Variant { Exact, Stochastic };

  WideRangeMinimizer(int num_actions, int num_swap, int num_external,
                     double learning_rate, Variant variant = Variant::Exact,
                     double loss_cap = 0.0);

  // Stores this round's time selections and applies the weight update driven
  // by the previous round's record.
  void observe_time_selection(std::span<const double> selections);
  // Current fixed-point distribution over actions.
  const std::vector<double>& recommend();
  // Exact variant: one shared loss vector.
  void observe_loss(std::span<const double> loss);
  // Stochastic variant: one estimator per index, same order as selections.
  void observe_losses(const std::vector<std::vector<double>>& losses);

  int num_actions() const { return num_actions_; }
  int num_indices() const { return num_swap_ + num_external_; }
  int num_pairs() const { return static_cast<int>(log_weight_.size()); }
  // log of the total unnormalized weight, for the W^t monotonicity property.
  double log_total_weight() const;
  // Normalized weight of one pair; index = swap pairs block then external.
  double pair_weight(int pair) const;

 private:
  void update_weights();

  int num_actions_;
  int num_swap_;
  int num_external_;
  double eta_;
  Variant variant_;
  double loss_cap_;
  std::vector<std::vector<int>> swaps_;
  std::vector<double> log_weight_;  // unnormalized, shifted by log_shift_
  double log_shift_ = 0.0;

  std::vector<double> cur_selection_;
  bool have_selection_ = false;
  std::vector<double> cur_p_;
  bool have_p_ = false;

  std::vector<double> prev_selection_;
  std::vector<double> prev_p_;
  std::vector<double> prev_loss_;                 // exact
  std::vector<std::vector<double>> prev_losses_;  // stochastic
  bool have_record_ = false;
};

}  // namespace kefce
