#include "kefce/kefr.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace kefce {

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double v = 1.0;
  for (int i = 0; i < k; ++i) v = v * (n - i) / (i + 1);
  return v;
}

double learning_rate_full(int horizon, int K, long long num_infosets, int num_actions,
                          long long rounds) {
  int keff = std::min(K, horizon);
  double numer = binomial(horizon, keff) * static_cast<double>(num_infosets) *
                 std::pow(num_actions, keff) * std::log(static_cast<double>(num_actions));
  return std::sqrt(numer / (static_cast<double>(horizon) * horizon * rounds));
}

BanditRate learning_rate_bandit(int horizon, int K, long long num_infosets,
                                int num_actions, double sum_xa, long long rounds,
                                double failure_prob) {
  int keff = std::min(K, horizon);
  double numer = binomial(horizon, keff) * static_cast<double>(num_infosets) *
                 std::pow(num_actions, keff + 1) * std::log(8.0 * sum_xa / failure_prob);
  double h3 = static_cast<double>(horizon) * horizon * horizon;
  return BanditRate{std::sqrt(numer / (h3 * rounds)), static_cast<double>(horizon)};
}

long long episodes_per_round(int horizon, int K) {
  int keff = std::min(K, horizon);
  return static_cast<long long>(binomial(horizon + 1, keff + 1) + 0.5) + keff - 1;
}

std::vector<double> recommendation_products(const TreeGame& game,
                                            const RechistoryCache& cache,
                                            const BehavioralPolicy& pi, int layer,
                                            int infoset) {
  const Infoset& x = game.infoset(cache.player(), layer, infoset);
  const RechistorySet& set = cache.at(layer, infoset);
  // The round's policy at earlier layers must already be fixed: time
  // selections at layer h read only layers below h.
  for (int k = 0; k < layer; ++k) {
    double sum = 0.0;
    for (double p : pi.rows[k][x.ancestors[k].first]) sum += p;
    if (std::abs(sum - 1.0) > 1e-9)
      throw RangeError("time selection read an unfixed policy row");
  }
  std::vector<double> out;
  out.reserve(set.type1.size() + set.type2.size());
  auto product = [&](const Rechistory& r) {
    std::vector<Action> b = r.expand(x);
    double m = 1.0;
    for (int k = 0; k < r.length; ++k) m *= pi.prob(k, x.ancestors[k].first, b[k]);
    return m;
  };
  for (const Rechistory& r : set.type1) out.push_back(product(r));
  for (const Rechistory& r : set.type2) out.push_back(product(r));
  return out;
}

std::vector<double> balanced_weights(const TreeGame& game, const RechistoryCache& cache,
                                     const BalancedPolicySet& balanced, int layer,
                                     int infoset) {
  int me = cache.player();
  const Infoset& x = game.infoset(me, layer, infoset);
  const RechistorySet& set = cache.at(layer, infoset);
  const BehavioralPolicy& star = balanced.policies[layer];
  std::vector<double> out;
  out.reserve(set.type1.size() + set.type2.size());
  int n1 = std::min(cache.K() - 1, layer);
  for (const Rechistory& r : set.type1) {
    std::vector<int> wset;
    for (auto& [k, b] : r.deviations) wset.push_back(k + 1);  // 1-based for fill
    std::vector<int> filled = fill(std::move(wset), n1);
    double w = star.prob(layer, infoset, 0);  // uniform at the target layer
    for (int k1 : filled) {
      int k = k1 - 1;
      w *= star.prob(k, x.ancestors[k].first, x.ancestors[k].second);
    }
    out.push_back(w);
  }
  for (const Rechistory& r : set.type2) {
    double w = star.prob(layer, infoset, 0);
    for (auto& [k, b] : r.deviations)
      w *= star.prob(k, x.ancestors[k].first, x.ancestors[k].second);
    for (int k = r.length; k < layer; ++k)
      w *= star.prob(k, x.ancestors[k].first, x.ancestors[k].second);
    out.push_back(w);
  }
  return out;
}

namespace {

LossEstimates shaped_estimates(const TreeGame& game, const RechistoryCache& cache) {
  int me = cache.player();
  int A = game.num_actions(me);
  LossEstimates est;
  est.type1.resize(game.horizon());
  est.type2.resize(game.horizon());
  for (int l = 0; l < game.horizon(); ++l) {
    est.type1[l].resize(game.num_infosets(me, l));
    est.type2[l].resize(game.num_infosets(me, l));
    for (int x = 0; x < game.num_infosets(me, l); ++x) {
      const RechistorySet& set = cache.at(l, x);
      est.type1[l][x].assign(set.type1.size(), std::vector<double>(A, 0.0));
      est.type2[l][x].assign(set.type2.size(), std::vector<double>(A, 0.0));
    }
  }
  return est;
}

void for_each_subset_of(int range, int size,
                        const std::function<void(const std::vector<int>&)>& fn) {
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
  if (size >= 0 && size <= range) rec(0, 0);
}

// Plays one episode with `rows` substituted for the player's policy at layers
// 0..target and returns (infoset, action, tail loss, on-path denominator).
struct SampleOutcome {
  int infoset = 0;
  Action action = 0;
  double tail = 0.0;
  double denom = 1.0;
};

SampleOutcome play_interlaced(const TreeGame& game, int me, const ProductPolicy& pi,
                              const BehavioralPolicy& sampler, int target, Rng& rng) {
  ProductPolicy samp = pi;
  samp[me] = sampler;
  Trajectory traj = play_episode(game, samp, rng);
  SampleOutcome out;
  out.infoset = traj.infosets[me][target];
  out.action = traj.actions[me][target];
  for (int k = target; k < game.horizon(); ++k) out.tail += 1.0 - traj.rewards[me][k];
  for (int k = 0; k <= target; ++k)
    out.denom *= sampler.prob(k, traj.infosets[me][k], traj.actions[me][k]);
  return out;
}

BehavioralPolicy interlace(const ProductPolicy& pi, const BalancedPolicySet& balanced,
                           int me, int target, const std::vector<int>& star_steps) {
  BehavioralPolicy mixed = pi[me];
  const BehavioralPolicy& star = balanced.policies[target];
  for (int k : star_steps) mixed.rows[k] = star.rows[k];
  mixed.rows[target] = star.rows[target];
  return mixed;
}

}  // namespace

LossEstimates typeI_estimates(const TreeGame& game, const RechistoryCache& cache,
                              const BalancedPolicySet& balanced, const ProductPolicy& pi,
                              Rng& rng, long long* episode_counter) {
  int me = cache.player();
  LossEstimates est = shaped_estimates(game, cache);
  if (cache.K() == 0) return est;  // no Type-I rechistories
  for (int l = 0; l < game.horizon(); ++l) {
    int n1 = std::min(cache.K() - 1, l);
    for_each_subset_of(l, n1, [&](const std::vector<int>& wbar) {
      BehavioralPolicy sampler = interlace(pi, balanced, me, l, wbar);
      SampleOutcome s = play_interlaced(game, me, pi, sampler, l, rng);
      if (episode_counter) ++*episode_counter;
      if (s.denom <= 0.0) return;
      const RechistorySet& set = cache.at(l, s.infoset);
      for (std::size_t t = 0; t < set.type1.size(); ++t) {
        std::vector<int> w1;
        for (auto& [k, b] : set.type1[t].deviations) w1.push_back(k + 1);
        std::vector<int> filled = fill(std::move(w1), n1);
        for (int& k1 : filled) k1 -= 1;
        if (filled == wbar) est.type1[l][s.infoset][t][s.action] = s.tail / s.denom;
      }
    });
  }
  return est;
}

LossEstimates typeII_estimates(const TreeGame& game, const RechistoryCache& cache,
                               const BalancedPolicySet& balanced, const ProductPolicy& pi,
                               Rng& rng, long long* episode_counter) {
  int me = cache.player();
  int K = cache.K();
  LossEstimates est = shaped_estimates(game, cache);
  for (int l = 0; l < game.horizon(); ++l) {
    if (K == 0) {
      // Single pattern per target layer: the empty rechistory, balanced play
      // up to the target.
      std::vector<int> steps;
      for (int k = 0; k < l; ++k) steps.push_back(k);
      BehavioralPolicy sampler = interlace(pi, balanced, me, l, steps);
      SampleOutcome s = play_interlaced(game, me, pi, sampler, l, rng);
      if (episode_counter) ++*episode_counter;
      if (s.denom <= 0.0) continue;
      est.type2[l][s.infoset][0][s.action] = s.tail / s.denom;
      continue;
    }
    for (int e = K - 1; e < l; ++e) {
      for_each_subset_of(e, K - 1, [&](const std::vector<int>& earlier) {
        std::vector<int> w = earlier;
        w.push_back(e);
        std::vector<int> steps = w;
        for (int k = e + 1; k < l; ++k) steps.push_back(k);
        BehavioralPolicy sampler = interlace(pi, balanced, me, l, steps);
        SampleOutcome s = play_interlaced(game, me, pi, sampler, l, rng);
        if (episode_counter) ++*episode_counter;
        if (s.denom <= 0.0) return;
        const RechistorySet& set = cache.at(l, s.infoset);
        for (std::size_t t = 0; t < set.type2.size(); ++t) {
          const Rechistory& r = set.type2[t];
          if (r.length != e + 1) continue;
          std::vector<int> positions;
          for (auto& [k, b] : r.deviations) positions.push_back(k);
          if (positions == w) est.type2[l][s.infoset][t][s.action] = s.tail / s.denom;
        }
      });
    }
  }
  return est;
}

namespace {

struct LearnerBank {
  std::vector<RechistoryCache> caches;
  std::vector<std::vector<std::vector<WideRangeMinimizer>>> minimizers;  // [i][l][x]
};

LearnerBank make_bank(const TreeGame& game, int K, WideRangeMinimizer::Variant variant,
                      const std::vector<double>& eta, double loss_cap) {
  LearnerBank bank;
  for (int i = 0; i < game.num_players(); ++i)
    bank.caches.emplace_back(game, i, K);
  bank.minimizers.resize(game.num_players());
  for (int i = 0; i < game.num_players(); ++i) {
    bank.minimizers[i].resize(game.horizon());
    for (int l = 0; l < game.horizon(); ++l) {
      for (int x = 0; x < game.num_infosets(i, l); ++x) {
        const RechistorySet& set = bank.caches[i].at(l, x);
        bank.minimizers[i][l].emplace_back(game.num_actions(i),
                                           static_cast<int>(set.type1.size()),
                                           static_cast<int>(set.type2.size()), eta[i],
                                           variant, loss_cap);
      }
    }
  }
  return bank;
}

ProductPolicy empty_product(const TreeGame& game) {
  ProductPolicy pi;
  for (int i = 0; i < game.num_players(); ++i) {
    BehavioralPolicy p;
    p.player = i;
    p.rows.resize(game.horizon());
    for (int l = 0; l < game.horizon(); ++l)
      p.rows[l].assign(game.num_infosets(i, l),
                       std::vector<double>(game.num_actions(i), 0.0));
    pi.push_back(std::move(p));
  }
  return pi;
}

}  // namespace

FullRunResult run_kefr_full(const TreeGame& game, int K, long long rounds,
                            const RateOptions& rates) {
  std::vector<double> eta(game.num_players());
  for (int i = 0; i < game.num_players(); ++i)
    eta[i] = rates.eta.value_or(learning_rate_full(
        game.horizon(), K, game.num_infosets(i), game.num_actions(i), rounds));
  LearnerBank bank = make_bank(game, K, WideRangeMinimizer::Variant::Exact, eta, 0.0);

  FullRunResult result;
  result.policies.reserve(rounds);
  for (long long t = 0; t < rounds; ++t) {
    ProductPolicy pi = empty_product(game);
    for (int i = 0; i < game.num_players(); ++i) {
      for (int l = 0; l < game.horizon(); ++l) {
        for (int x = 0; x < game.num_infosets(i, l); ++x) {
          auto s = recommendation_products(game, bank.caches[i], pi[i], l, x);
          WideRangeMinimizer& min = bank.minimizers[i][l][x];
          min.observe_time_selection(s);
          pi[i].rows[l][x] = min.recommend();
        }
      }
    }
    for (int i = 0; i < game.num_players(); ++i) {
      LossTable losses = counterfactual_losses(game, pi, i);
      for (int l = 0; l < game.horizon(); ++l)
        for (int x = 0; x < game.num_infosets(i, l); ++x)
          bank.minimizers[i][l][x].observe_loss(losses.cumulative[l][x]);
    }
    result.policies.push_back(std::move(pi));
  }
  return result;
}

BanditRunResult run_kefr_bandit(const TreeGame& game, int K, long long rounds,
                                double failure_prob, std::uint64_t seed,
                                const RateOptions& rates) {
  if (!(failure_prob > 0.0 && failure_prob < 1.0))
    throw RangeError("failure probability must lie in (0,1)");
  double sum_xa = 0.0;
  for (int i = 0; i < game.num_players(); ++i)
    sum_xa += static_cast<double>(game.num_infosets(i)) * game.num_actions(i);

  std::vector<double> eta(game.num_players());
  double loss_cap = game.horizon();
  for (int i = 0; i < game.num_players(); ++i) {
    BanditRate rate = learning_rate_bandit(game.horizon(), K, game.num_infosets(i),
                                           game.num_actions(i), sum_xa, rounds,
                                           failure_prob);
    eta[i] = rates.eta.value_or(rate.eta);
    loss_cap = rate.loss_cap;
  }
  LearnerBank bank = make_bank(game, K, WideRangeMinimizer::Variant::Stochastic, eta,
                               loss_cap);

  std::vector<BalancedPolicySet> balanced;
  std::vector<std::vector<std::vector<std::vector<double>>>> weights(game.num_players());
  for (int i = 0; i < game.num_players(); ++i) {
    balanced.push_back(balanced_policy_set(game, i));
    weights[i].resize(game.horizon());
    for (int l = 0; l < game.horizon(); ++l)
      for (int x = 0; x < game.num_infosets(i, l); ++x)
        weights[i][l].push_back(balanced_weights(game, bank.caches[i], balanced[i], l, x));
  }

  Rng rng(seed);
  BanditRunResult result;
  result.policies.reserve(rounds);
  for (long long t = 0; t < rounds; ++t) {
    ProductPolicy pi = empty_product(game);
    for (int i = 0; i < game.num_players(); ++i) {
      for (int l = 0; l < game.horizon(); ++l) {
        for (int x = 0; x < game.num_infosets(i, l); ++x) {
          auto s = recommendation_products(game, bank.caches[i], pi[i], l, x);
          for (std::size_t b = 0; b < s.size(); ++b) s[b] *= weights[i][l][x][b];
          WideRangeMinimizer& min = bank.minimizers[i][l][x];
          min.observe_time_selection(s);
          pi[i].rows[l][x] = min.recommend();
        }
      }
    }
    // Round-robin sampling: player i plays its estimator episodes while the
    // opponents stay frozen at this round's policies.
    for (int i = 0; i < game.num_players(); ++i) {
      LossEstimates e1 = typeI_estimates(game, bank.caches[i], balanced[i], pi, rng,
                                         &result.episodes);
      LossEstimates e2 = typeII_estimates(game, bank.caches[i], balanced[i], pi, rng,
                                          &result.episodes);
      for (int l = 0; l < game.horizon(); ++l) {
        for (int x = 0; x < game.num_infosets(i, l); ++x) {
          std::vector<std::vector<double>> losses;
          losses.reserve(e1.type1[l][x].size() + e2.type2[l][x].size());
          for (auto& v : e1.type1[l][x]) losses.push_back(v);
          for (auto& v : e2.type2[l][x]) losses.push_back(v);
          bank.minimizers[i][l][x].observe_losses(losses);
        }
      }
    }
    result.policies.push_back(std::move(pi));
  }
  return result;
}

}  // namespace kefce
