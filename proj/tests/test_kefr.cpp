#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kefce/bench.hpp"
#include "kefce/eval.hpp"
#include "kefce/kefr.hpp"
#include "test_support.hpp"

using namespace kefce;
using namespace kefce::test;

TEST_CASE("learning rates") {
  CHECK(learning_rate_full(1, 1, 2, 2, 4) == doctest::Approx(std::sqrt(std::log(2.0))));
  CHECK(learning_rate_full(2, 1, 5, 2, 64) >
        learning_rate_full(2, 1, 5, 2, 128));
  BanditRate rate = learning_rate_bandit(3, 1, 5, 2, 20.0, 64, 0.05);
  CHECK(rate.loss_cap == doctest::Approx(3.0));
  double expect = std::sqrt(3.0 * 5 * 4 * std::log(8.0 * 20.0 / 0.05) / (27.0 * 64));
  CHECK(rate.eta == doctest::Approx(expect));
}

TEST_CASE("episode counts per sampling pass") {
  CHECK(episodes_per_round(3, 1) == 6);
  CHECK(episodes_per_round(2, 1) == 3);
  CHECK(episodes_per_round(3, 2) == 5);
  CHECK(episodes_per_round(3, 3) == 3);
  CHECK(episodes_per_round(3, 9) == 3);  // clamped to the horizon
  CHECK(episodes_per_round(2, 0) == 2);

  // The closed form matches the actual number of episodes played.
  for (int H : {2, 3}) {
    for (int K = 0; K <= H; ++K) {
      TreeGame game = gen_random_game(5, 2, H, 2, 1);
      RechistoryCache cache(game, 0, K);
      BalancedPolicySet balanced = balanced_policy_set(game, 0);
      ProductPolicy pi = uniform_product(game);
      Rng rng(1);
      long long episodes = 0;
      typeI_estimates(game, cache, balanced, pi, rng, &episodes);
      typeII_estimates(game, cache, balanced, pi, rng, &episodes);
      CHECK(episodes == episodes_per_round(H, K));
    }
  }
}

TEST_CASE("full-feedback K=0 on a two-armed game finds the best arm") {
  // Single player, single step: the learner reduces to external-regret Hedge
  // with the constant time selection.
  nlohmann::json spec;
  spec["players"] = 1;
  spec["horizon"] = 1;
  spec["action_counts"] = {2};
  spec["initial"] = std::vector<double>{1.0};
  nlohmann::json js;
  js["infoset"] = {0};
  js["rewards"]["0"] = {0.9};
  js["rewards"]["1"] = {0.2};
  spec["states"] = {nlohmann::json::array({js})};
  TreeGame game = TreeGame::validate(spec);

  auto run = run_kefr_full(game, 0, 2000);
  double avg0 = 0.0;
  for (const auto& pi : run.policies) avg0 += pi[0].prob(0, 0, 0);
  avg0 /= run.policies.size();
  CHECK(avg0 > 0.95);

  CorrelatedPolicy avg;
  avg.weights.assign(run.policies.size(), 1.0 / run.policies.size());
  avg.components = run.policies;
  CHECK(kefce_gap(game, avg, 0).gap < 0.02);
}

TEST_CASE("full feedback is deterministic") {
  TreeGame game = gen_random_game(7, 2, 2, 2, 1);
  auto a = run_kefr_full(game, 1, 40);
  auto b = run_kefr_full(game, 1, 40);
  REQUIRE(a.policies.size() == b.policies.size());
  for (std::size_t t = 0; t < a.policies.size(); ++t)
    for (int i = 0; i < 2; ++i)
      CHECK(a.policies[t][i].rows == b.policies[t][i].rows);
}

TEST_CASE("bandit runs are reproducible by seed") {
  TreeGame game = gen_random_game(7, 2, 2, 2, 1);
  auto a = run_kefr_bandit(game, 1, 30, 0.05, 99);
  auto b = run_kefr_bandit(game, 1, 30, 0.05, 99);
  auto c = run_kefr_bandit(game, 1, 30, 0.05, 100);
  CHECK(a.episodes == b.episodes);
  bool identical = true, differs = false;
  for (std::size_t t = 0; t < a.policies.size(); ++t) {
    for (int i = 0; i < 2; ++i) {
      identical &= a.policies[t][i].rows == b.policies[t][i].rows;
      differs |= a.policies[t][i].rows != c.policies[t][i].rows;
    }
  }
  CHECK(identical);
  CHECK(differs);
}

TEST_CASE("bandit episode accounting") {
  for (auto [H, K] : std::vector<std::pair<int, int>>{{2, 1}, {3, 1}, {3, 2}, {3, 3}}) {
    TreeGame game = gen_random_game(11, 2, H, 2, 1);
    long long T = 3;
    auto run = run_kefr_bandit(game, K, T, 0.05, 5);
    CHECK(run.episodes == game.num_players() * T * episodes_per_round(H, K));
  }
}

TEST_CASE("loss estimators are unbiased and respect the cap") {
  for (std::uint64_t seed : {201u, 202u}) {
    TreeGame game = gen_random_game(seed, 2, 3, 2, 1);
    int me = 0, K = 1;
    RechistoryCache cache(game, me, K);
    BalancedPolicySet balanced = balanced_policy_set(game, me);
    Rng prng(seed + 1);
    ProductPolicy pi = {random_policy(game, 0, prng), random_policy(game, 1, prng)};
    LossTable exact = counterfactual_losses(game, pi, me);

    // Accumulate estimator moments over repeated fresh passes.
    struct Moments {
      double sum = 0.0, sumsq = 0.0;
    };
    auto shaped = [&](auto& table) {
      table.resize(game.horizon());
      for (int l = 0; l < game.horizon(); ++l) {
        table[l].resize(game.num_infosets(me, l));
        for (int x = 0; x < game.num_infosets(me, l); ++x) {
          const RechistorySet& set = cache.at(l, x);
          table[l][x].assign(set.type1.size() + set.type2.size(),
                             std::vector<Moments>(2));
        }
      }
    };
    std::vector<std::vector<std::vector<std::vector<Moments>>>> stats;
    shaped(stats);

    const int n = 30000;
    Rng rng(seed + 2);
    double cap = game.horizon();
    for (int rep = 0; rep < n; ++rep) {
      LossEstimates e1 = typeI_estimates(game, cache, balanced, pi, rng);
      LossEstimates e2 = typeII_estimates(game, cache, balanced, pi, rng);
      for (int l = 0; l < game.horizon(); ++l) {
        for (int x = 0; x < game.num_infosets(me, l); ++x) {
          auto selections = recommendation_products(game, cache, pi[me], l, x);
          auto weights = balanced_weights(game, cache, balanced, l, x);
          const RechistorySet& set = cache.at(l, x);
          for (std::size_t r = 0; r < set.type1.size(); ++r) {
            for (Action a = 0; a < 2; ++a) {
              double v = e1.type1[l][x][r][a];
              stats[l][x][r][a].sum += v;
              stats[l][x][r][a].sumsq += v * v;
              CHECK(selections[r] * weights[r] * v <= cap * (1 + 1e-9));
            }
          }
          for (std::size_t r = 0; r < set.type2.size(); ++r) {
            std::size_t slot = set.type1.size() + r;
            for (Action a = 0; a < 2; ++a) {
              double v = e2.type2[l][x][r][a];
              stats[l][x][slot][a].sum += v;
              stats[l][x][slot][a].sumsq += v * v;
              CHECK(selections[slot] * weights[slot] * v <= cap * (1 + 1e-9));
            }
          }
        }
      }
    }

    for (int l = 0; l < game.horizon(); ++l) {
      for (int x = 0; x < game.num_infosets(me, l); ++x) {
        const RechistorySet& set = cache.at(l, x);
        std::size_t slots = set.type1.size() + set.type2.size();
        for (std::size_t r = 0; r < slots; ++r) {
          for (Action a = 0; a < 2; ++a) {
            const Moments& m = stats[l][x][r][a];
            double mean = m.sum / n;
            double var = std::max(m.sumsq / n - mean * mean, 0.0);
            double se = std::sqrt(var / n);
            CHECK(std::abs(mean - exact.cumulative[l][x][a]) <= 4 * se + 1e-6);
          }
        }
      }
    }
  }
}

TEST_CASE("full-feedback learning trends") {
  auto gap_at = [](const TreeGame& game, const std::vector<ProductPolicy>& pol,
                   long long upto) {
    CorrelatedPolicy avg;
    avg.weights.assign(upto, 1.0 / upto);
    avg.components.assign(pol.begin(), pol.begin() + upto);
    return kefce_gap(game, avg, 1).gap;
  };
  SUBCASE("the mirror game starts at equilibrium and stays there") {
    // Uniform play is an exact K-EFCE of the mirror game and the symmetric
    // dynamics never leave it.
    GeneratedGame g = gen_containment_game(1);
    auto run = run_kefr_full(g.game, 1, 64);
    CHECK(gap_at(g.game, run.policies, 16) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(gap_at(g.game, run.policies, 64) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("an off-equilibrium game contracts") {
    TreeGame game = gen_random_game(41, 2, 2, 2, 1);
    auto run = run_kefr_full(game, 1, 512);
    CHECK(gap_at(game, run.policies, 512) < gap_at(game, run.policies, 32));
  }
}
