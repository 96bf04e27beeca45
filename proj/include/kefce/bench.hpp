#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kefce/game.hpp"
#include "kefce/policy.hpp"

namespace kefce {

struct GeneratedGame {
  TreeGame game;
  CorrelatedPolicy pibar;
};

// Two-player perfect-information game with H = K+1 steps whose mirror mixture
// is a K-EFCE but not a (K+1)-EFCE. The returned mixture plays, per component,
// one shared action per layer; it induces the same per-path recommendation law
// as the uniform mixture over all mirror pure policies.
GeneratedGame gen_containment_game(int K);

// Two-step game whose coupled uniform mixture has zero gap against every
// observe-as-you-go deviation but a strictly positive NFCE gap.
GeneratedGame gen_nfce_example();

// Three-card Kuhn poker as a tree game: the deal is folded into the initial
// distribution, non-acting players take dummy actions, and chip outcomes in
// {-2..2} are rescaled to rewards (chips+2)/4.
TreeGame gen_kuhn_poker();

// Random tree with perfect-recall-consistent infosets (own history plus a
// seeded coarsening of public information) and i.i.d. uniform rewards.
TreeGame gen_random_game(std::uint64_t seed, int players, int horizon, int actions,
                         int initial_states, int max_branching = 2, int obs_bits = 1);

struct ExperimentConfig {
  std::string game_source;  // file path or containment:K | nfce | kuhn | random:<seed>[:m:H:A:n1]
  std::vector<int> k_list;
  long long rounds = 0;
  std::string mode = "full";  // full | bandit
  std::vector<std::uint64_t> seeds = {1};
  std::string out_path;
  std::optional<double> eta;
  double failure_prob = 0.05;
  int max_mixture = 64;
  std::uint64_t subsample_seed = 7;
  bool include_timing = true;
};

TreeGame load_game_source(const std::string& source);

// Runs the configured learner for each (K, seed) cell, evaluates gaps at a
// geometric checkpoint schedule, and writes one CSV. Cells run on a worker
// pool capped by KEFCE_THREADS.
void run_experiment(const ExperimentConfig& cfg);

}  // namespace kefce
