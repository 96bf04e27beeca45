#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kefce/bench.hpp"
#include "kefce/eval.hpp"
#include "kefce/game.hpp"
#include "kefce/kefr.hpp"

namespace py = pybind11;
using namespace kefce;

namespace {

TreeGame game_from_json_str(const std::string& text) {
  return TreeGame::validate(nlohmann::json::parse(text));
}

CorrelatedPolicy policy_from_json_str(const TreeGame& game, const std::string& text) {
  return correlated_from_json(game, nlohmann::json::parse(text));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tree-game correlated-equilibrium toolkit: exact gap evaluation and "
            "no-regret learners under full and bandit feedback.";

  py::register_exception<Error>(m, "KefceError");

  py::class_<TreeGame>(m, "TreeGame")
      .def_static("from_json", &game_from_json_str, py::arg("text"))
      .def_property_readonly("players", &TreeGame::num_players)
      .def_property_readonly("horizon", &TreeGame::horizon)
      .def("num_actions", &TreeGame::num_actions)
      .def("num_infosets",
           py::overload_cast<int>(&TreeGame::num_infosets, py::const_))
      .def("digest", &TreeGame::digest)
      .def("summary", [](const TreeGame& g) { return g.summary().dump(); })
      .def("to_json", [](const TreeGame& g) { return g.to_json().dump(); });

  py::class_<CorrelatedPolicy>(m, "CorrelatedPolicy")
      .def_property_readonly("size", &CorrelatedPolicy::size)
      .def_readonly("pure_mixture", &CorrelatedPolicy::pure_mixture);

  py::class_<GapReport>(m, "GapReport")
      .def_readonly("gap", &GapReport::gap)
      .def_readonly("player", &GapReport::player)
      .def_readonly("per_player", &GapReport::per_player)
      .def_readonly("modification_digest", &GapReport::modification_digest);

  m.def("load_policy", &policy_from_json_str, py::arg("game"), py::arg("text"));
  m.def(
      "gen_containment_game",
      [](int K) {
        auto g = gen_containment_game(K);
        return py::make_tuple(std::move(g.game), std::move(g.pibar));
      },
      py::arg("K"));
  m.def("gen_nfce_example", []() {
    auto g = gen_nfce_example();
    return py::make_tuple(std::move(g.game), std::move(g.pibar));
  });
  m.def("gen_kuhn_poker", &gen_kuhn_poker);
  m.def("gen_random_game", &gen_random_game, py::arg("seed"), py::arg("players"),
        py::arg("horizon"), py::arg("actions"), py::arg("initial_states"),
        py::arg("max_branching") = 2, py::arg("obs_bits") = 1);

  m.def("kefce_gap", &kefce_gap, py::arg("game"), py::arg("pibar"), py::arg("K"),
        py::arg("budget") = 4'000'000LL);
  m.def("kefce_gap_bruteforce", &kefce_gap_bruteforce, py::arg("game"),
        py::arg("pibar"), py::arg("K"), py::arg("max_modifications") = 100'000LL);
  m.def("trigger_gap", &trigger_gap, py::arg("game"), py::arg("pibar"));
  m.def("nfcce_gap", &nfcce_gap, py::arg("game"), py::arg("pibar"));
  m.def("nfce_gap", &nfce_gap, py::arg("game"), py::arg("pibar"));
  m.def(
      "value",
      [](const TreeGame& game, const CorrelatedPolicy& pibar, int player) {
        return value(game, pibar, player);
      },
      py::arg("game"), py::arg("pibar"), py::arg("player"));

  m.def(
      "run_kefr_full",
      [](const TreeGame& game, int K, long long rounds, std::optional<double> eta) {
        auto run = run_kefr_full(game, K, rounds, RateOptions{eta});
        CorrelatedPolicy avg;
        avg.weights.assign(run.policies.size(), 1.0 / run.policies.size());
        avg.components = std::move(run.policies);
        return avg;
      },
      py::arg("game"), py::arg("K"), py::arg("rounds"), py::arg("eta") = std::nullopt,
      "Runs self-play and returns the uniform average as a correlated policy.");
  m.def(
      "run_kefr_bandit",
      [](const TreeGame& game, int K, long long rounds, double failure_prob,
         std::uint64_t seed, std::optional<double> eta) {
        auto run = run_kefr_bandit(game, K, rounds, failure_prob, seed,
                                   RateOptions{eta});
        CorrelatedPolicy avg;
        avg.weights.assign(run.policies.size(), 1.0 / run.policies.size());
        avg.components = std::move(run.policies);
        return py::make_tuple(std::move(avg), run.episodes);
      },
      py::arg("game"), py::arg("K"), py::arg("rounds"), py::arg("failure_prob") = 0.05,
      py::arg("seed") = 1, py::arg("eta") = std::nullopt,
      "Runs bandit-feedback self-play; returns (average policy, episode count).");
  m.def("episodes_per_round", &episodes_per_round, py::arg("horizon"), py::arg("K"));
  m.def("learning_rate_full", &learning_rate_full, py::arg("horizon"), py::arg("K"),
        py::arg("num_infosets"), py::arg("num_actions"), py::arg("rounds"));
}
