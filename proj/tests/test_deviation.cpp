#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kefce/bench.hpp"
#include "kefce/deviation.hpp"
#include "kefce/kefr.hpp"
#include "test_support.hpp"

using namespace kefce;
using namespace kefce::test;

TEST_CASE("fill") {
  CHECK(fill({1, 3, 8}, 5) == std::vector<int>{1, 2, 3, 4, 8});
  CHECK(fill({}, 0) == std::vector<int>{});
  CHECK(fill({2}, 3) == std::vector<int>{1, 2, 3});
  CHECK_THROWS_AS(fill({1, 2}, 1), SizeError);
}

TEST_CASE("classify") {
  TreeGame game = TreeGame::validate(path_tree_spec_1p(3, 2));
  // Infoset 3 at layer 2 has ancestor actions (1, 1).
  const Infoset& x = game.infoset(0, 2, 3);
  REQUIRE(x.ancestors[0].second == 1);
  REQUIRE(x.ancestors[1].second == 1);

  SUBCASE("matching full history is Type-I") {
    auto r = classify(game, 0, 2, 3, {1, 1}, 1);
    REQUIRE(r.has_value());
    CHECK(r->kind == Rechistory::Kind::TypeI);
    CHECK(r->deviations.empty());
  }
  SUBCASE("first-step deviation freezes as Type-II") {
    auto r = classify(game, 0, 2, 3, {0}, 1);
    REQUIRE(r.has_value());
    CHECK(r->kind == Rechistory::Kind::TypeII);
    CHECK(r->length == 1);
  }
  SUBCASE("K=0 convention: the empty history is Type-II") {
    auto r = classify(game, 0, 2, 3, {}, 0);
    REQUIRE(r.has_value());
    CHECK(r->kind == Rechistory::Kind::TypeII);
    CHECK(r->length == 0);
    CHECK_FALSE(classify(game, 0, 2, 3, {1}, 0).has_value());
  }
  SUBCASE("invalid shapes") {
    // Too many deviations for Type-I, no stopping deviation for Type-II.
    CHECK_FALSE(classify(game, 0, 2, 3, {0, 0}, 1).has_value());
    CHECK_FALSE(classify(game, 0, 2, 3, {1}, 1).has_value());
    CHECK_THROWS_AS(classify(game, 0, 2, 3, {1, 1, 1}, 1), LengthError);
  }
}

TEST_CASE("rechistory enumeration counts") {
  TreeGame game = TreeGame::validate(path_tree_spec_1p(3, 2));

  SUBCASE("K=1 at the third layer") {
    RechistoryCache cache(game, 0, 1);
    const RechistorySet& set = cache.at(2, 0);
    CHECK(set.type1.size() == 1);
    CHECK(set.type2.size() == 2);
  }
  SUBCASE("K at or above the horizon leaves no Type-II entries") {
    RechistoryCache cache(game, 0, 5);
    CHECK(cache.K() == game.horizon());
    for (int l = 0; l < game.horizon(); ++l)
      for (int x = 0; x < game.num_infosets(0, l); ++x)
        CHECK(cache.at(l, x).type2.empty());
  }
  SUBCASE("K=0 has only the empty Type-II entry") {
    RechistoryCache cache(game, 0, 0);
    for (int l = 0; l < game.horizon(); ++l) {
      for (int x = 0; x < game.num_infosets(0, l); ++x) {
        CHECK(cache.at(l, x).type1.empty());
        REQUIRE(cache.at(l, x).type2.size() == 1);
        CHECK(cache.at(l, x).type2[0].length == 0);
      }
    }
  }
  SUBCASE("counting formulas on a wider action set") {
    TreeGame wide = TreeGame::validate(path_tree_spec_1p(3, 3));
    for (int K : {1, 2, 3}) {
      RechistoryCache cache(wide, 0, K);
      for (int l = 0; l < 3; ++l) {
        const RechistorySet& set = cache.at(l, 0);
        double expect1 = 0.0;
        for (int d = 0; d <= std::min(K - 1, l); ++d)
          expect1 += binomial(l, d) * std::pow(2.0, d);
        CHECK(static_cast<double>(set.type1.size()) == doctest::Approx(expect1));
        double expect2 = 0.0;
        for (int hp = K; hp <= l; ++hp)
          expect2 += binomial(hp - 1, K - 1) * std::pow(2.0, K);
        CHECK(static_cast<double>(set.type2.size()) == doctest::Approx(expect2));
      }
    }
  }
  SUBCASE("budget cap") {
    TreeGame wide = TreeGame::validate(path_tree_spec_1p(3, 3));
    CHECK_THROWS_AS(RechistoryCache(wide, 0, 2, 10), BudgetExceeded);
  }
}

TEST_CASE("identity modification reproduces the base policy") {
  TreeGame game = gen_random_game(31, 2, 3, 2, 1);
  RechistoryCache cache(game, 0, 1);
  StrategyModification id = StrategyModification::identity(cache);
  Rng prng(4);
  ProductPolicy pi = {random_policy(game, 0, prng), random_policy(game, 1, prng)};

  for (int l = 0; l < game.horizon(); ++l)
    for (int x = 0; x < game.num_infosets(0, l); ++x)
      for (Action a = 0; a < 2; ++a)
        CHECK(modified_sequence_form(game, cache, id, pi[0], l, x, a) ==
              doctest::Approx(sequence_form_policy(game, pi[0], l, x, a)));

  // Sampled play agrees with the base distribution on mean returns.
  Rng rng(5);
  const int n = 60000;
  std::vector<double> modified(n), base(n);
  for (int e = 0; e < n; ++e) {
    Trajectory t1 = execute_modified(game, cache, id, pi, rng);
    Trajectory t2 = play_episode(game, pi, rng);
    modified[e] = base[e] = 0.0;
    for (double r : t1.rewards[0]) modified[e] += r;
    for (double r : t2.rewards[0]) base[e] += r;
  }
  auto m1 = mean_and_stderr(modified);
  auto m2 = mean_and_stderr(base);
  CHECK(std::abs(m1.mean - m2.mean) <=
        4 * std::sqrt(m1.stderr_ * m1.stderr_ + m2.stderr_ * m2.stderr_));
}

TEST_CASE("deviate-everywhere modification wins the containment game") {
  GeneratedGame g = gen_containment_game(1);
  int H = g.game.horizon();
  RechistoryCache cache(g.game, 0, H);  // K = H: recommendations stay visible
  StrategyModification flip = StrategyModification::identity(cache);
  for (auto& layer : flip.type1)
    for (auto& x : layer)
      for (auto& table : x)
        for (Action rec = 0; rec < 2; ++rec) table[rec] = 1 - rec;

  Rng rng(6);
  for (int e = 0; e < 200; ++e) {
    const ProductPolicy& comp = sample_component(g.pibar, rng);
    Trajectory traj = execute_modified(g.game, cache, flip, comp, rng);
    double total = 0.0;
    for (double r : traj.rewards[0]) total += r;
    CHECK(total == doctest::Approx(1.0));
  }
}

TEST_CASE("modified sequence form matches execution frequencies and identities") {
  TreeGame game = gen_random_game(77, 2, 3, 2, 1);
  for (int K : {0, 1, 2}) {
    CAPTURE(K);
    RechistoryCache cache(game, 0, K);
    Rng prng(K + 10);
    ProductPolicy pi = {random_policy(game, 0, prng), random_policy(game, 1, prng)};

    // A fixed non-trivial modification.
    StrategyModification phi = StrategyModification::identity(cache);
    Rng mod_rng(K + 20);
    for (auto& layer : phi.type1)
      for (auto& x : layer)
        for (auto& table : x)
          for (Action rec = 0; rec < 2; ++rec)
            table[rec] = mod_rng.uniform() < 0.35 ? 1 - rec : rec;
    for (auto& layer : phi.type2)
      for (auto& x : layer)
        for (auto& entry : x) entry = mod_rng.uniform() < 0.5 ? 0 : 1;

    // Balancing identity for the modified policy's sequence form.
    BalancedPolicySet balanced = balanced_policy_set(game, 0);
    for (int l = 0; l < game.horizon(); ++l) {
      double total = 0.0;
      for (int x = 0; x < game.num_infosets(0, l); ++x)
        for (Action a = 0; a < 2; ++a)
          total += modified_sequence_form(game, cache, phi, pi[0], l, x, a) /
                   sequence_form_policy(game, balanced.policies[l], l, x, a);
      CHECK(total == doctest::Approx(game.num_infosets(0, l) * 2.0).epsilon(1e-9));
    }

    // Reach normalization against the opponents' marginal.
    for (int l = 0; l < game.horizon(); ++l) {
      double total = 0.0;
      for (int x = 0; x < game.num_infosets(0, l); ++x) {
        double reach = marginal_reach(game, pi, 0, l, x);
        for (Action a = 0; a < 2; ++a)
          total += modified_sequence_form(game, cache, phi, pi[0], l, x, a) * reach;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }

    // Sampled visit frequencies of (x, a) at the final layer.
    int l = game.horizon() - 1;
    int cells = game.num_infosets(0, l) * 2;
    std::vector<int> hits(cells, 0);
    Rng rng(K + 30);
    const int n = 60000;
    for (int e = 0; e < n; ++e) {
      Trajectory traj = execute_modified(game, cache, phi, pi, rng);
      ++hits[traj.infosets[0][l] * 2 + traj.actions[0][l]];
    }
    for (int x = 0; x < game.num_infosets(0, l); ++x) {
      for (Action a = 0; a < 2; ++a) {
        double p = modified_sequence_form(game, cache, phi, pi[0], l, x, a) *
                   marginal_reach(game, pi, 0, l, x);
        double freq = hits[x * 2 + a] / double(n);
        double se = std::sqrt(std::max(p * (1 - p), 1e-12) / n);
        CHECK(std::abs(freq - p) <= 4 * se + 2e-3);
      }
    }
  }
}

TEST_CASE("modification serialization round trip") {
  TreeGame game = gen_random_game(13, 2, 2, 2, 1);
  RechistoryCache cache(game, 1, 1);
  StrategyModification phi = StrategyModification::identity(cache);
  phi.type1[0][0][0] = {1, 0};
  if (!phi.type2[1].empty() && !phi.type2[1][0].empty()) phi.type2[1][0][0] = 1;
  StrategyModification back =
      StrategyModification::from_json(cache, phi.to_json(cache));
  CHECK(back.digest() == phi.digest());
}
