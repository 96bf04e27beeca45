#include "kefce/regret.hpp"

#include <algorithm>
#include <cmath>

namespace kefce {

std::vector<std::vector<int>> all_swap_maps(int num_actions) {
  if (num_actions < 1 || num_actions > 8)
    throw RangeError("swap modification set materialized only for 1 <= A <= 8");
  long long count = 1;
  for (int i = 0; i < num_actions; ++i) count *= num_actions;
  std::vector<std::vector<int>> maps;
  maps.reserve(count);
  std::vector<int> cur(num_actions, 0);
  while (true) {
    maps.push_back(cur);
    int pos = num_actions - 1;
    while (pos >= 0 && ++cur[pos] == num_actions) cur[pos--] = 0;
    if (pos < 0) break;
  }
  return maps;
}

std::vector<double> stationary_distribution(const std::vector<std::vector<double>>& Q,
                                            double residual_tol, long long max_iters) {
  int n = static_cast<int>(Q.size());
  std::vector<double> p(n, 1.0 / n), next(n);
  for (long long it = 0; it < max_iters; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int b = 0; b < n; ++b)
      for (int a = 0; a < n; ++a) next[a] += p[b] * Q[b][a];
    double norm = 0.0;
    for (double v : next) norm += v;
    for (double& v : next) v /= norm;
    double residual = 0.0;
    for (int a = 0; a < n; ++a) residual += std::abs(next[a] - p[a]);
    if (residual <= residual_tol) return p;
    p = next;
  }
  throw ConvergenceFailure("fixed-point iteration did not reach the residual target");
}

WideRangeMinimizer::WideRangeMinimizer(int num_actions, int num_swap, int num_external,
                                       double learning_rate, Variant variant,
                                       double loss_cap)
    : num_actions_(num_actions),
      num_swap_(num_swap),
      num_external_(num_external),
      eta_(learning_rate),
      variant_(variant),
      loss_cap_(loss_cap) {
  if (num_swap_ + num_external_ == 0) throw EmptyIndexSets("no time-selection indices");
  if (num_swap_ < 0 || num_external_ < 0) throw RangeError("negative index-set size");
  if (!(eta_ > 0.0)) throw RangeError("learning rate must be positive");
  if (variant_ == Variant::Stochastic && !(loss_cap_ > 0.0))
    throw RangeError("stochastic variant needs a positive loss cap");
  swaps_ = all_swap_maps(num_actions_);
  int num_swap_maps = static_cast<int>(swaps_.size());
  // q^0(b, psi) proportional to |Psi^e| on swap pairs and |Psi^s| on external
  // pairs.
  log_weight_.assign(num_swap_ * num_swap_maps + num_external_ * num_actions_, 0.0);
  int pair = 0;
  for (int b = 0; b < num_swap_; ++b)
    for (int s = 0; s < num_swap_maps; ++s) log_weight_[pair++] = std::log(double(num_actions_));
  for (int b = 0; b < num_external_; ++b)
    for (int a = 0; a < num_actions_; ++a) log_weight_[pair++] = std::log(double(num_swap_maps));
}

void WideRangeMinimizer::update_weights() {
  if (!have_record_) return;
  int num_swap_maps = static_cast<int>(swaps_.size());
  double discount;
  if (variant_ == Variant::Exact) {
    double max_loss = 0.0;
    for (double v : prev_loss_) max_loss = std::max(max_loss, v);
    discount = std::exp(-eta_ * max_loss);
  } else {
    discount = std::exp(-eta_ * loss_cap_);
  }

  auto inner = [&](const std::vector<double>& loss) {
    double v = 0.0;
    for (int a = 0; a < num_actions_; ++a) v += prev_p_[a] * loss[a];
    return v;
  };
  auto inner_pushed = [&](const std::vector<int>& psi, const std::vector<double>& loss) {
    double v = 0.0;
    for (int a = 0; a < num_actions_; ++a) v += prev_p_[a] * loss[psi[a]];
    return v;
  };

  int pair = 0;
  for (int b = 0; b < num_swap_; ++b) {
    const std::vector<double>& loss = variant_ == Variant::Exact ? prev_loss_ : prev_losses_[b];
    double s = prev_selection_[b];
    double base = eta_ * discount * s * inner(loss);
    for (int m = 0; m < num_swap_maps; ++m, ++pair)
      log_weight_[pair] += base - eta_ * s * inner_pushed(swaps_[m], loss);
  }
  for (int b = 0; b < num_external_; ++b) {
    int idx = num_swap_ + b;
    const std::vector<double>& loss = variant_ == Variant::Exact ? prev_loss_ : prev_losses_[idx];
    double s = prev_selection_[idx];
    double base = eta_ * discount * s * inner(loss);
    for (int a = 0; a < num_actions_; ++a, ++pair) {
      // A constant map's pushforward picks loss[a] with total mass one.
      log_weight_[pair] += base - eta_ * s * loss[a];
    }
  }

  // Rebase to keep the exponentials representable; the shift is tracked so
  // log_total_weight stays exact.
  double top = *std::max_element(log_weight_.begin(), log_weight_.end());
  if (top < -500.0 || top > 500.0) {
    for (double& w : log_weight_) w -= top;
    log_shift_ += top;
  }
}

void WideRangeMinimizer::observe_time_selection(std::span<const double> selections) {
  if (static_cast<int>(selections.size()) != num_indices())
    throw RangeError("time-selection count mismatch");
  for (double s : selections)
    if (!(s >= 0.0 && s <= 1.0)) throw RangeError("time selection outside [0,1]");
  update_weights();
  have_record_ = false;
  cur_selection_.assign(selections.begin(), selections.end());
  have_selection_ = true;
  have_p_ = false;
}

const std::vector<double>& WideRangeMinimizer::recommend() {
  if (!have_selection_) throw RangeError("recommend before observe_time_selection");
  if (have_p_) return cur_p_;
  int num_swap_maps = static_cast<int>(swaps_.size());

  double top = *std::max_element(log_weight_.begin(), log_weight_.end());
  std::vector<std::vector<double>> Q(num_actions_, std::vector<double>(num_actions_, 0.0));
  double mass = 0.0;
  int pair = 0;
  for (int b = 0; b < num_swap_; ++b) {
    double s = cur_selection_[b];
    for (int m = 0; m < num_swap_maps; ++m, ++pair) {
      if (s == 0.0) continue;
      double w = s * std::exp(log_weight_[pair] - top);
      mass += w;
      const std::vector<int>& psi = swaps_[m];
      for (int a = 0; a < num_actions_; ++a) Q[a][psi[a]] += w;
    }
  }
  for (int b = 0; b < num_external_; ++b) {
    double s = cur_selection_[num_swap_ + b];
    for (int a = 0; a < num_actions_; ++a, ++pair) {
      if (s == 0.0) continue;
      double w = s * std::exp(log_weight_[pair] - top);
      mass += w;
      for (int from = 0; from < num_actions_; ++from) Q[from][a] += w;
    }
  }

  if (mass <= 0.0) {
    // Zero total time-selection mass: the fixed-point equation is vacuous.
    cur_p_.assign(num_actions_, 1.0 / num_actions_);
  } else {
    for (auto& row : Q)
      for (double& v : row) v /= mass;
    cur_p_ = stationary_distribution(Q);
  }
  have_p_ = true;
  return cur_p_;
}

void WideRangeMinimizer::observe_loss(std::span<const double> loss) {
  if (variant_ != Variant::Exact) throw RangeError("observe_loss is for the exact variant");
  if (static_cast<int>(loss.size()) != num_actions_) throw RangeError("loss size mismatch");
  if (!have_selection_) throw RangeError("observe_loss before observe_time_selection");
  for (double v : loss)
    if (!(v >= 0.0) || !std::isfinite(v)) throw RangeError("losses must be finite and nonnegative");
  recommend();
  prev_selection_ = cur_selection_;
  prev_p_ = cur_p_;
  prev_loss_.assign(loss.begin(), loss.end());
  have_record_ = true;
  have_selection_ = false;
}

void WideRangeMinimizer::observe_losses(const std::vector<std::vector<double>>& losses) {
  if (variant_ != Variant::Stochastic)
    throw RangeError("observe_losses is for the stochastic variant");
  if (static_cast<int>(losses.size()) != num_indices()) throw RangeError("loss count mismatch");
  if (!have_selection_) throw RangeError("observe_losses before observe_time_selection");
  for (int b = 0; b < num_indices(); ++b) {
    if (static_cast<int>(losses[b].size()) != num_actions_) throw RangeError("loss size mismatch");
    double max_loss = 0.0;
    for (double v : losses[b]) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw RangeError("losses must be finite and nonnegative");
      max_loss = std::max(max_loss, v);
    }
    if (cur_selection_[b] * max_loss > loss_cap_ * (1.0 + 1e-9))
      throw CapExceeded("estimator exceeds the loss cap");
  }
  recommend();
  prev_selection_ = cur_selection_;
  prev_p_ = cur_p_;
  prev_losses_ = losses;
  have_record_ = true;
  have_selection_ = false;
}

double WideRangeMinimizer::log_total_weight() const {
  double top = *std::max_element(log_weight_.begin(), log_weight_.end());
  double sum = 0.0;
  for (double w : log_weight_) sum += std::exp(w - top);
  return log_shift_ + top + std::log(sum);
}

double WideRangeMinimizer::pair_weight(int pair) const {
  double top = *std::max_element(log_weight_.begin(), log_weight_.end());
  double sum = 0.0;
  for (double w : log_weight_) sum += std::exp(w - top);
  return std::exp(log_weight_[pair] - top) / sum;
}

}  // namespace kefce
