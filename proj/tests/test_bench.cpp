#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "kefce/bench.hpp"
#include "kefce/eval.hpp"
#include "kefce/kefr.hpp"
#include "test_support.hpp"

using namespace kefce;
using namespace kefce::test;

TEST_CASE("containment generator") {
  for (int K : {0, 1, 2}) {
    GeneratedGame g = gen_containment_game(K);
    CHECK(g.game.horizon() == K + 1);
    CHECK(g.pibar.size() == (1 << (K + 1)));
    CHECK(g.pibar.pure_mixture);
    CHECK(value(g.game, g.pibar, 0) == doctest::Approx(0.5));
  }
  CHECK_THROWS_AS(gen_containment_game(5), SizeGuard);
}

TEST_CASE("nfce example generator") {
  GeneratedGame g = gen_nfce_example();
  CHECK(g.game.horizon() == 2);
  CHECK(g.game.num_infosets(0) == 5);
  CHECK(g.game.num_infosets(1) == 5);
  CHECK(g.pibar.size() == 32);
  CHECK(value(g.game, g.pibar, 0) == doctest::Approx(0.5));
}

namespace {

// Standalone Kuhn enumeration in chips, used as the value oracle.
double kuhn_uniform_chips() {
  const int deals[6][2] = {{0, 1}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}};
  double total = 0.0;
  for (auto& d : deals) {
    double win = d[0] > d[1] ? 1.0 : -1.0;
    // check/check, check/bet-fold, check/bet-call, bet/fold, bet/call.
    double check_branch = 0.5 * win + 0.5 * (0.5 * -1.0 + 0.5 * 2.0 * win);
    double bet_branch = 0.5 * 1.0 + 0.5 * 2.0 * win;
    total += (0.5 * check_branch + 0.5 * bet_branch) / 6.0;
  }
  return total;
}

}  // namespace

TEST_CASE("kuhn poker") {
  TreeGame game = gen_kuhn_poker();
  CHECK(game.num_players() == 2);
  CHECK(game.horizon() == 3);
  // Card, then card x own first move, then x own dummy move x opponent move.
  CHECK(game.num_infosets(0, 0) == 3);
  CHECK(game.num_infosets(0, 1) == 6);
  CHECK(game.num_infosets(0, 2) == 24);
  CHECK(game.num_infosets(1, 0) == 3);

  ProductPolicy uniform = uniform_product(game);
  double expect = (kuhn_uniform_chips() + 2.0) / 4.0;
  CHECK(value(game, uniform, 0) == doctest::Approx(expect).epsilon(1e-12));
  // The chip game is zero-sum, so the rescaled values sum to one.
  CHECK(value(game, uniform, 0) + value(game, uniform, 1) == doctest::Approx(1.0));
}

TEST_CASE("learning drives the Kuhn gap down") {
  // Regression baseline: measured gap 0.0160 at T=2^14 on first run; the
  // run is deterministic.
  TreeGame game = gen_kuhn_poker();
  auto run = run_kefr_full(game, 1, 16384);
  CorrelatedPolicy avg;
  avg.weights.assign(run.policies.size(), 1.0 / run.policies.size());
  avg.components = run.policies;
  double gap = kefce_gap(game, avg, 1).gap;
  CHECK(gap <= 0.05 * game.horizon());
  CHECK(gap <= 0.018);
}

TEST_CASE("random game generator is deterministic and size guarded") {
  TreeGame a = gen_random_game(100, 2, 3, 2, 2);
  TreeGame b = gen_random_game(100, 2, 3, 2, 2);
  CHECK(a.digest() == b.digest());
  for (std::uint64_t seed = 0; seed < 30; ++seed)
    CHECK_NOTHROW(gen_random_game(seed, 2, 2, 2, 1));
  CHECK_THROWS_AS(gen_random_game(1, 3, 6, 3, 4), SizeGuard);
}

TEST_CASE("experiment runner") {
  ExperimentConfig cfg;
  cfg.game_source = "random:41";
  cfg.k_list = {0, 1};
  cfg.rounds = 32;
  cfg.mode = "bandit";
  cfg.seeds = {1, 2};
  cfg.include_timing = false;

  auto read_lines = [](const std::string& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
  };

  cfg.out_path = "/tmp/kefce_test_a.csv";
  run_experiment(cfg);
  auto a = read_lines(cfg.out_path);
  cfg.out_path = "/tmp/kefce_test_b.csv";
  run_experiment(cfg);
  auto b = read_lines(cfg.out_path);

  // Comment, header, then checkpoints x K x seeds x players rows.
  std::size_t checkpoints = 2;  // 16 and 32
  CHECK(a.size() == 2 + checkpoints * 2 * 2 * 2);
  CHECK(a == b);

  TreeGame game = load_game_source(cfg.game_source);
  long long per_round = game.num_players() * episodes_per_round(game.horizon(), 1);
  bool saw_episode_row = false;
  for (std::size_t n = 2; n < a.size(); ++n) {
    std::stringstream ss(a[n]);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    REQUIRE(fields.size() == 10);
    if (fields[2] == "1" && fields[3] == "32") {
      CHECK(std::stoll(fields[8]) == per_round * 32);
      saw_episode_row = true;
    }
  }
  CHECK(saw_episode_row);

  SUBCASE("full mode rows carry no episodes") {
    cfg.mode = "full";
    cfg.seeds = {1};
    cfg.out_path = "/tmp/kefce_test_c.csv";
    run_experiment(cfg);
    auto c = read_lines(cfg.out_path);
    CHECK(c.size() == 2 + checkpoints * 2 * 1 * 2);
    for (std::size_t n = 2; n < c.size(); ++n)
      CHECK(c[n].find(",0,") != std::string::npos);
  }
}

TEST_CASE("thinning keeps checkpoint evaluation bounded") {
  ExperimentConfig cfg;
  cfg.game_source = "containment:0";
  cfg.k_list = {0};
  cfg.rounds = 300;
  cfg.mode = "full";
  cfg.max_mixture = 16;
  cfg.include_timing = false;
  cfg.out_path = "/tmp/kefce_test_thin.csv";
  run_experiment(cfg);
  std::ifstream in(cfg.out_path);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  // 16, 32, 64, 128, 256, 300 checkpoints; two players.
  CHECK(rows == 2 + 6 * 2);
}
