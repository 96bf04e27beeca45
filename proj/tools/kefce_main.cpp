#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "kefce/bench.hpp"
#include "kefce/eval.hpp"
#include "kefce/game.hpp"

using namespace kefce;

namespace {

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open file: " + path);
  out << j.dump(2) << "\n";
}

std::vector<int> parse_k_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(std::stoi(part));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree-game correlated-equilibrium toolkit"};
  app.require_subcommand(1);

  // validate
  std::string game_path;
  auto* validate = app.add_subcommand("validate", "Validate a game file and print its digest");
  validate->add_option("game", game_path, "game JSON file")->required();

  // gaps
  std::string gaps_game, gaps_policy, gaps_k = "1";
  bool with_trigger = false, with_nfcce = false, with_nfce = false;
  auto* gaps = app.add_subcommand("gaps", "Evaluate equilibrium gaps of a correlated policy");
  gaps->add_option("game", gaps_game, "game JSON file or generator source")->required();
  gaps->add_option("--policy", gaps_policy, "correlated policy JSON file")->required();
  gaps->add_option("--K", gaps_k, "comma-separated K values");
  gaps->add_flag("--trigger", with_trigger, "also report the trigger gap");
  gaps->add_flag("--nfcce", with_nfcce, "also report the NFCCE gap");
  gaps->add_flag("--nfce", with_nfce, "also report the NFCE gap (pure mixtures)");

  // learn
  ExperimentConfig cfg;
  std::string learn_k = "1", learn_seeds = "1";
  double eta_flag = 0.0;
  auto* learn = app.add_subcommand("learn", "Run a learner and write gap-vs-round CSV");
  learn->add_option("--game", cfg.game_source, "game file or generator source")->required();
  learn->add_option("--mode", cfg.mode, "full | bandit")
      ->check(CLI::IsMember({"full", "bandit"}));
  learn->add_option("--K", learn_k, "comma-separated K values");
  learn->add_option("--T", cfg.rounds, "number of rounds")->required();
  learn->add_option("--seed", learn_seeds, "comma-separated seeds (bandit mode)");
  learn->add_option("--out", cfg.out_path, "output CSV path")->required();
  learn->add_option("--p", cfg.failure_prob, "failure probability (bandit rates)");
  auto* eta_opt = learn->add_option("--eta", eta_flag, "learning-rate override");
  learn->add_option("--max-mixture", cfg.max_mixture,
                    "mixture size cap for checkpoint gap evaluation");
  learn->add_option("--subsample-seed", cfg.subsample_seed, "thinning subsample seed");
  bool no_timing = false;
  learn->add_flag("--no-timing", no_timing, "write wall_ms as 0 for reproducible files");

  // gen
  std::string gen_kind, gen_out, gen_policy_out;
  int gen_K = 1, gen_m = 2, gen_H = 2, gen_A = 2, gen_n1 = 1, gen_branching = 2,
      gen_obs = 1;
  std::uint64_t gen_seed = 1;
  auto* gen = app.add_subcommand("gen", "Generate a game (and mixture when defined)");
  gen->add_option("kind", gen_kind, "containment | nfce | kuhn | random")->required();
  gen->add_option("--K", gen_K, "containment parameter");
  gen->add_option("--seed", gen_seed, "random-game seed");
  gen->add_option("--m", gen_m, "players");
  gen->add_option("--H", gen_H, "horizon");
  gen->add_option("--A", gen_A, "actions per player");
  gen->add_option("--n1", gen_n1, "initial states");
  gen->add_option("--branching", gen_branching, "max transition branching");
  gen->add_option("--obs-bits", gen_obs, "public observation bits");
  gen->add_option("--out", gen_out, "game output path")->required();
  gen->add_option("--policy-out", gen_policy_out, "mixture output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) {
      TreeGame game = TreeGame::validate(read_json(game_path));
      std::cout << game.summary().dump(2) << "\n";
      return 0;
    }
    if (*gaps) {
      TreeGame game = load_game_source(gaps_game);
      CorrelatedPolicy pibar = correlated_from_json(game, read_json(gaps_policy));
      nlohmann::json out = nlohmann::json::object();
      nlohmann::json by_k = nlohmann::json::array();
      for (int K : parse_k_list(gaps_k)) {
        GapReport rep = kefce_gap(game, pibar, K);
        nlohmann::json entry = rep.to_json();
        entry["K"] = K;
        by_k.push_back(std::move(entry));
      }
      out["kefce"] = by_k;
      if (with_trigger) out["trigger_gap"] = trigger_gap(game, pibar);
      if (with_nfcce) out["nfcce_gap"] = nfcce_gap(game, pibar);
      if (with_nfce) out["nfce_gap"] = nfce_gap(game, pibar);
      std::cout << out.dump(2) << "\n";
      return 0;
    }
    if (*learn) {
      cfg.k_list = parse_k_list(learn_k);
      cfg.seeds.clear();
      for (int v : parse_k_list(learn_seeds)) cfg.seeds.push_back(v);
      if (*eta_opt) cfg.eta = eta_flag;
      cfg.include_timing = !no_timing;
      run_experiment(cfg);
      std::cout << "wrote " << cfg.out_path << "\n";
      return 0;
    }
    if (*gen) {
      if (gen_kind == "containment") {
        GeneratedGame g = gen_containment_game(gen_K);
        write_json(gen_out, g.game.to_json());
        if (!gen_policy_out.empty())
          write_json(gen_policy_out, correlated_to_json(g.game, g.pibar));
      } else if (gen_kind == "nfce") {
        GeneratedGame g = gen_nfce_example();
        write_json(gen_out, g.game.to_json());
        if (!gen_policy_out.empty())
          write_json(gen_policy_out, correlated_to_json(g.game, g.pibar));
      } else if (gen_kind == "kuhn") {
        write_json(gen_out, gen_kuhn_poker().to_json());
      } else if (gen_kind == "random") {
        write_json(gen_out, gen_random_game(gen_seed, gen_m, gen_H, gen_A, gen_n1,
                                            gen_branching, gen_obs)
                                .to_json());
      } else {
        std::cerr << "unknown generator: " << gen_kind << "\n";
        return 2;
      }
      std::cout << "wrote " << gen_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
