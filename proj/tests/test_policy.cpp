#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kefce/bench.hpp"
#include "kefce/game.hpp"
#include "kefce/policy.hpp"
#include "test_support.hpp"

using namespace kefce;
using namespace kefce::test;

namespace {

TreeGame lopsided_game() {
  // One player, H=2: action 0 fans out to three leaves, action 1 to one.
  nlohmann::json spec;
  spec["players"] = 1;
  spec["horizon"] = 2;
  spec["action_counts"] = {2};
  spec["initial"] = std::vector<double>{1.0};
  nlohmann::json root;
  root["infoset"] = {0};
  root["next"]["0"] = {{"0", 1.0 / 3}, {"1", 1.0 / 3}, {"2", 1.0 / 3}};
  root["next"]["1"] = 3;
  nlohmann::json leaves = nlohmann::json::array();
  for (int k = 0; k < 4; ++k) {
    nlohmann::json js;
    js["infoset"] = {k};
    leaves.push_back(js);
  }
  spec["states"] = {nlohmann::json::array({root}), leaves};
  return TreeGame::validate(spec);
}

}  // namespace

TEST_CASE("balanced policy on a symmetric tree is uniform") {
  TreeGame game = TreeGame::validate(path_tree_spec_1p(3, 2));
  BalancedPolicySet set = balanced_policy_set(game, 0);
  for (int target = 0; target < 3; ++target)
    for (int l = 0; l < 3; ++l)
      for (int x = 0; x < game.num_infosets(0, l); ++x)
        for (Action a = 0; a < 2; ++a)
          CHECK(set.policies[target].prob(l, x, a) == doctest::Approx(0.5));
}

TEST_CASE("balanced policy follows descendant-count ratios") {
  TreeGame game = lopsided_game();
  BalancedPolicySet set = balanced_policy_set(game, 0);
  CHECK(set.policies[1].prob(0, 0, 0) == doctest::Approx(0.75));
  CHECK(set.policies[1].prob(0, 0, 1) == doctest::Approx(0.25));
  // At and past the target layer the policy is uniform.
  CHECK(set.policies[0].prob(0, 0, 0) == doctest::Approx(0.5));
}

TEST_CASE("balancing identity and transition relation") {
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    TreeGame game = gen_random_game(seed, 2, 3, 2, 2);
    for (int i = 0; i < 2; ++i) {
      BalancedPolicySet set = balanced_policy_set(game, i);
      Rng rng(seed + 100 * i);
      for (int rep = 0; rep < 20; ++rep) {
        BehavioralPolicy pi =
            rep % 2 == 0 ? random_policy(game, i, rng) : random_pure_policy(game, i, rng);
        for (int l = 0; l < game.horizon(); ++l) {
          double total = 0.0;
          for (int x = 0; x < game.num_infosets(i, l); ++x)
            for (Action a = 0; a < game.num_actions(i); ++a)
              total += sequence_form_policy(game, pi, l, x, a) /
                       sequence_form_policy(game, set.policies[l], l, x, a);
          double expect = game.num_infosets(i, l) * game.num_actions(i);
          CHECK(total == doctest::Approx(expect).epsilon(1e-9));
        }
      }
      // Reciprocal relation between the balanced transition and the policy's
      // sequence form, plus the unit-sum property.
      Rng rng2(seed + 7);
      BehavioralPolicy pi = random_policy(game, i, rng2);
      for (int l = 0; l < game.horizon(); ++l) {
        double unit = 0.0;
        for (int x = 0; x < game.num_infosets(i, l); ++x) {
          double p = balanced_transition(game, set, l, x);
          for (Action a = 0; a < game.num_actions(i); ++a) {
            double recip = 1.0 / (game.num_infosets(i, l) * game.num_actions(i) *
                                  sequence_form_policy(game, set.policies[l], l, x, a));
            CHECK(p == doctest::Approx(recip).epsilon(1e-12));
            unit += sequence_form_policy(game, pi, l, x, a) * p;
          }
        }
        CHECK(unit == doctest::Approx(1.0).epsilon(1e-9));
      }
      // Full support along every sequence at the target layer.
      for (int l = 0; l < game.horizon(); ++l)
        for (int x = 0; x < game.num_infosets(i, l); ++x)
          for (Action a = 0; a < game.num_actions(i); ++a)
            CHECK(sequence_form_policy(game, set.policies[l], l, x, a) > 0.0);
    }
  }
}

TEST_CASE("balanced transition closed forms on symmetric trees") {
  // Full A-ary tree: the descendant-count ratios cancel layer by layer.
  TreeGame game = TreeGame::validate(path_tree_spec_1p(3, 2));
  BalancedPolicySet set = balanced_policy_set(game, 0);
  for (int l = 0; l < 3; ++l)
    for (int x = 0; x < game.num_infosets(0, l); ++x)
      CHECK(balanced_transition(game, set, l, x) == doctest::Approx(1.0));

  // With several first-layer infosets the transition starts at 1/X_{i,1}.
  nlohmann::json spec;
  spec["players"] = 1;
  spec["horizon"] = 1;
  spec["action_counts"] = {2};
  spec["initial"] = std::vector<double>{0.25, 0.25, 0.5};
  nlohmann::json layer = nlohmann::json::array();
  for (int k = 0; k < 3; ++k) {
    nlohmann::json js;
    js["infoset"] = {k};
    layer.push_back(js);
  }
  spec["states"] = {layer};
  TreeGame wide = TreeGame::validate(spec);
  BalancedPolicySet wide_set = balanced_policy_set(wide, 0);
  for (int x = 0; x < 3; ++x)
    CHECK(balanced_transition(wide, wide_set, 0, x) == doctest::Approx(1.0 / 3));
}

TEST_CASE("sample_component") {
  GeneratedGame g = gen_containment_game(0);
  SUBCASE("singleton mixture") {
    CorrelatedPolicy single;
    single.weights = {1.0};
    single.components = {g.pibar.components[0]};
    Rng rng(1);
    for (int k = 0; k < 10; ++k)
      CHECK(&sample_component(single, rng) == &single.components[0]);
  }
  SUBCASE("degenerate weights pick the supported component") {
    CorrelatedPolicy two;
    two.weights = {1.0, 0.0};
    two.components = {g.pibar.components[0], g.pibar.components[1]};
    Rng rng(2);
    for (int k = 0; k < 10; ++k)
      CHECK(&sample_component(two, rng) == &two.components[0]);
  }
  SUBCASE("uniform two-component frequencies") {
    CorrelatedPolicy two;
    two.weights = {0.5, 0.5};
    two.components = {g.pibar.components[0], g.pibar.components[1]};
    Rng rng(3);
    int first = 0;
    const int n = 100000;
    for (int k = 0; k < n; ++k)
      if (&sample_component(two, rng) == &two.components[0]) ++first;
    CHECK(std::abs(first / double(n) - 0.5) <= 0.01);
  }
  SUBCASE("empty mixture") {
    CorrelatedPolicy none;
    Rng rng(4);
    CHECK_THROWS_AS(sample_component(none, rng), EmptyMixture);
  }
}

TEST_CASE("policy serialization round trip") {
  TreeGame game = gen_random_game(9, 2, 2, 2, 2);
  Rng rng(5);
  BehavioralPolicy pi = random_policy(game, 1, rng);
  BehavioralPolicy back = policy_from_json(game, policy_to_json(game, pi));
  CHECK(back.player == 1);
  for (int l = 0; l < game.horizon(); ++l)
    CHECK(back.rows[l] == pi.rows[l]);

  GeneratedGame g = gen_containment_game(1);
  CorrelatedPolicy round =
      correlated_from_json(g.game, correlated_to_json(g.game, g.pibar));
  CHECK(round.size() == g.pibar.size());
  CHECK(round.pure_mixture);
  CHECK(value(g.game, round, 0) == doctest::Approx(value(g.game, g.pibar, 0)));
}

TEST_CASE("policy validation") {
  TreeGame game = TreeGame::validate(path_tree_spec_1p(2, 2));
  BehavioralPolicy pi = uniform_policy(game, 0);
  CHECK_NOTHROW(check_policy(game, pi));
  pi.rows[0][0][0] = 0.7;
  CHECK_THROWS_AS(check_policy(game, pi), RangeError);
}
