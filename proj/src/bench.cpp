#include "kefce/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "kefce/eval.hpp"
#include "kefce/kefr.hpp"

namespace kefce {

namespace {

nlohmann::json state_json(const std::vector<int>& infoset) {
  nlohmann::json j;
  j["infoset"] = infoset;
  return j;
}

std::string key2(int a, int b) { return std::to_string(a) + "," + std::to_string(b); }

}  // namespace

GeneratedGame gen_containment_game(int K) {
  if (K < 0 || K > 4) throw SizeGuard("containment game supported for 0 <= K <= 4");
  int H = K + 1;
  nlohmann::json spec;
  spec["players"] = 2;
  spec["horizon"] = H;
  spec["action_counts"] = {2, 2};
  spec["initial"] = std::vector<double>{1.0};

  nlohmann::json layers = nlohmann::json::array();
  int n = 1;
  for (int l = 0; l < H; ++l) {
    nlohmann::json layer = nlohmann::json::array();
    for (int k = 0; k < n; ++k) {
      nlohmann::json js = state_json({k, k});
      if (l + 1 < H) {
        nlohmann::json nx;
        for (int j = 0; j < 4; ++j) nx[key2(j % 2, j / 2)] = k * 4 + j;
        js["next"] = nx;
      }
      if (l == H - 1) {
        // Decode the joint-action history from the state index.
        nlohmann::json rw;
        for (int j = 0; j < 4; ++j) {
          bool all_differ = true, all_equal = true;
          int code = k;
          for (int step = 0; step < l; ++step) {
            int jj = code % 4;
            code /= 4;
            all_differ &= (jj % 2) != (jj / 2);
            all_equal &= (jj % 2) == (jj / 2);
          }
          all_differ &= (j % 2) != (j / 2);
          all_equal &= (j % 2) == (j / 2);
          double r1 = all_differ ? 1.0 : (all_equal ? 0.5 : 0.0);
          if (r1 != 0.0) rw[key2(j % 2, j / 2)] = {r1, 0.0};
        }
        if (!rw.empty()) js["rewards"] = rw;
      }
      layer.push_back(std::move(js));
    }
    layers.push_back(std::move(layer));
    n *= 4;
  }
  spec["states"] = layers;

  GeneratedGame out{TreeGame::validate(spec), {}};
  int comps = 1 << H;
  for (int d = 0; d < comps; ++d) {
    ProductPolicy comp;
    for (int i = 0; i < 2; ++i) {
      std::vector<std::vector<int>> actions(H);
      for (int l = 0; l < H; ++l)
        actions[l].assign(out.game.num_infosets(i, l), (d >> l) & 1);
      comp.push_back(pure_policy(out.game, i, actions));
    }
    out.pibar.components.push_back(std::move(comp));
    out.pibar.weights.push_back(1.0 / comps);
  }
  out.pibar.refresh_purity();
  return out;
}

GeneratedGame gen_nfce_example() {
  nlohmann::json spec;
  spec["players"] = 2;
  spec["horizon"] = 2;
  spec["action_counts"] = {2, 2};
  spec["initial"] = std::vector<double>{1.0};

  nlohmann::json root = state_json({0, 0});
  {
    nlohmann::json nx, rw;
    for (int j = 0; j < 4; ++j) {
      nx[key2(j % 2, j / 2)] = j;
      if (j % 2 == 0) rw[key2(j % 2, j / 2)] = {0.5, 0.0};
    }
    root["next"] = nx;
    root["rewards"] = rw;
  }
  nlohmann::json layer1 = nlohmann::json::array();
  for (int s = 0; s < 4; ++s) {
    nlohmann::json js = state_json({s, s});
    if (s % 2 == 1) {
      // First player chose the second root action; payoff rides on the
      // opponent's action here.
      nlohmann::json rw;
      for (int j = 0; j < 4; ++j)
        if (j / 2 == 0) rw[key2(j % 2, j / 2)] = {1.0, 0.0};
      js["rewards"] = rw;
    }
    layer1.push_back(std::move(js));
  }
  spec["states"] = {nlohmann::json::array({root}), layer1};

  GeneratedGame out{TreeGame::validate(spec), {}};
  for (int c = 0; c < 32; ++c) {
    ProductPolicy comp;
    for (int i = 0; i < 2; ++i) {
      std::vector<std::vector<int>> actions(2);
      actions[0] = {c & 1};
      actions[1].resize(4);
      for (int x = 0; x < 4; ++x) actions[1][x] = (c >> (1 + x)) & 1;
      comp.push_back(pure_policy(out.game, i, actions));
    }
    out.pibar.components.push_back(std::move(comp));
    out.pibar.weights.push_back(1.0 / 32.0);
  }
  out.pibar.refresh_purity();
  return out;
}

TreeGame gen_kuhn_poker() {
  const std::vector<std::pair<int, int>> deals = {{0, 1}, {0, 2}, {1, 0},
                                                  {1, 2}, {2, 0}, {2, 1}};
  auto chips_showdown = [&](int d, int stake) {
    return deals[d].first > deals[d].second ? stake : -stake;
  };
  auto scaled = [](int chips) {
    return std::vector<double>{(chips + 2) / 4.0, (2 - chips) / 4.0};
  };

  nlohmann::json spec;
  spec["players"] = 2;
  spec["horizon"] = 3;
  spec["action_counts"] = {2, 2};
  spec["initial"] = std::vector<double>(6, 1.0 / 6.0);

  nlohmann::json layer0 = nlohmann::json::array();
  for (int d = 0; d < 6; ++d) {
    nlohmann::json js = state_json({deals[d].first, deals[d].second});
    nlohmann::json nx;
    for (int j = 0; j < 4; ++j) nx[key2(j % 2, j / 2)] = d * 4 + j;
    js["next"] = nx;
    layer0.push_back(std::move(js));
  }

  nlohmann::json layer1 = nlohmann::json::array();
  for (int d = 0; d < 6; ++d) {
    for (int j0 = 0; j0 < 4; ++j0) {
      int p1_move = j0 % 2;   // 0 = check, 1 = bet
      int p2_dummy = j0 / 2;
      auto [c1, c2] = deals[d];
      nlohmann::json js =
          state_json({c1 * 2 + p1_move, (c2 * 2 + p2_dummy) * 2 + p1_move});
      nlohmann::json nx, rw;
      for (int j = 0; j < 4; ++j) {
        int p2_move = j / 2;  // check/bet after a check, fold/call after a bet
        nx[key2(j % 2, j / 2)] = (d * 4 + j0) * 4 + j;
        int chips = 0;
        bool terminal = false;
        if (p1_move == 0 && p2_move == 0) {
          chips = chips_showdown(d, 1);
          terminal = true;
        } else if (p1_move == 1) {
          chips = p2_move == 0 ? 1 : chips_showdown(d, 2);
          terminal = true;
        }
        if (terminal) rw[key2(j % 2, j / 2)] = scaled(chips);
      }
      js["next"] = nx;
      if (!rw.empty()) js["rewards"] = rw;
      layer1.push_back(std::move(js));
    }
  }

  nlohmann::json layer2 = nlohmann::json::array();
  for (int d = 0; d < 6; ++d) {
    for (int j0 = 0; j0 < 4; ++j0) {
      for (int j1 = 0; j1 < 4; ++j1) {
        int p1_move = j0 % 2, p2_dummy = j0 / 2;
        int p1_dummy = j1 % 2, p2_move = j1 / 2;
        auto [c1, c2] = deals[d];
        int f1 = ((c1 * 2 + p1_move) * 2 + p1_dummy) * 2 + p2_move;
        int f2 = ((c2 * 2 + p2_dummy) * 2 + p1_move) * 2 + p2_move;
        nlohmann::json js = state_json({f1, f2});
        if (p1_move == 0 && p2_move == 1) {
          // Facing a bet after checking: fold or call.
          nlohmann::json rw;
          for (int j = 0; j < 4; ++j) {
            int chips = j % 2 == 0 ? -1 : chips_showdown(d, 2);
            rw[key2(j % 2, j / 2)] = scaled(chips);
          }
          js["rewards"] = rw;
        }
        layer2.push_back(std::move(js));
      }
    }
  }

  spec["states"] = {layer0, layer1, layer2};
  return TreeGame::validate(spec);
}

TreeGame gen_random_game(std::uint64_t seed, int players, int horizon, int actions,
                         int initial_states, int max_branching, int obs_bits) {
  if (players < 1 || horizon < 1 || actions < 1 || initial_states < 1 ||
      max_branching < 1)
    throw SizeGuard("bad generator parameters");
  Rng rng(seed);
  int num_joint = 1;
  for (int i = 0; i < players; ++i) num_joint *= actions;

  // Per layer: per state: per player label, and transition targets.
  std::vector<std::vector<std::vector<long long>>> labels(horizon);
  std::vector<int> layer_size(horizon, 0);
  layer_size[0] = initial_states;
  long long total = initial_states;

  labels[0].resize(initial_states);
  for (int k = 0; k < initial_states; ++k) {
    labels[0][k].resize(players);
    for (int i = 0; i < players; ++i)
      labels[0][k][i] = obs_bits > 0 ? static_cast<long long>(rng.uniform() * (1 << obs_bits)) : 0;
  }

  struct Edge {
    int parent, joint;
    std::vector<std::pair<int, double>> dist;
  };
  std::vector<std::vector<Edge>> edges(horizon);  // edges[l]: into layer l

  for (int l = 0; l + 1 < horizon; ++l) {
    labels[l + 1].clear();
    for (int k = 0; k < layer_size[l]; ++k) {
      for (int j = 0; j < num_joint; ++j) {
        int branch = max_branching > 1 && rng.uniform() < 0.5 ? 2 : 1;
        std::vector<std::pair<int, double>> dist;
        double split = 0.3 + 0.4 * rng.uniform();
        for (int c = 0; c < branch; ++c) {
          int child = layer_size[l + 1]++;
          dist.emplace_back(child, branch == 1 ? 1.0 : (c == 0 ? split : 1.0 - split));
          std::vector<long long> lab(players);
          for (int i = 0; i < players; ++i) {
            int own = (j / [&] {
              int s = 1;
              for (int q = 0; q < i; ++q) s *= actions;
              return s;
            }()) % actions;
            long long obs = obs_bits > 0
                                ? static_cast<long long>(rng.uniform() * (1 << obs_bits))
                                : 0;
            lab[i] = (labels[l][k][i] * actions + own) * (1 << obs_bits) * 2 + obs;
          }
          labels[l + 1].push_back(std::move(lab));
        }
        edges[l + 1].push_back({k, j, std::move(dist)});
      }
    }
    total += layer_size[l + 1];
    if (total > 50000) throw SizeGuard("generated game too large");
  }

  nlohmann::json spec;
  spec["players"] = players;
  spec["horizon"] = horizon;
  std::vector<int> ac(players, actions);
  spec["action_counts"] = ac;
  spec["initial"] = std::vector<double>(initial_states, 1.0 / initial_states);

  auto jkey = [&](int joint) {
    std::string key;
    int rem = joint;
    for (int i = 0; i < players; ++i) {
      if (i > 0) key += ',';
      key += std::to_string(rem % actions);
      rem /= actions;
    }
    return key;
  };

  nlohmann::json jl = nlohmann::json::array();
  for (int l = 0; l < horizon; ++l) {
    // Group the incoming edges by parent for the `next` tables.
    std::vector<std::vector<const Edge*>> by_parent;
    if (l + 1 < horizon) {
      by_parent.assign(layer_size[l], {});
      for (const Edge& e : edges[l + 1]) by_parent[e.parent].push_back(&e);
    }
    nlohmann::json layer = nlohmann::json::array();
    for (int k = 0; k < layer_size[l]; ++k) {
      std::vector<int> info(players);
      for (int i = 0; i < players; ++i) info[i] = static_cast<int>(labels[l][k][i] % 1000000007LL);
      nlohmann::json js = state_json(info);
      nlohmann::json rw;
      for (int j = 0; j < num_joint; ++j) {
        std::vector<double> r(players);
        for (int i = 0; i < players; ++i) r[i] = rng.uniform();
        rw[jkey(j)] = r;
      }
      js["rewards"] = rw;
      if (l + 1 < horizon) {
        nlohmann::json nx;
        for (const Edge* e : by_parent[k]) {
          if (e->dist.size() == 1) {
            nx[jkey(e->joint)] = e->dist[0].first;
          } else {
            nlohmann::json dist;
            for (auto& [c, p] : e->dist) dist[std::to_string(c)] = p;
            nx[jkey(e->joint)] = dist;
          }
        }
        js["next"] = nx;
      }
      layer.push_back(std::move(js));
    }
    jl.push_back(std::move(layer));
  }
  spec["states"] = jl;
  return TreeGame::validate(spec);
}

TreeGame load_game_source(const std::string& source) {
  if (source.rfind("containment:", 0) == 0)
    return gen_containment_game(std::stoi(source.substr(12))).game;
  if (source == "nfce") return gen_nfce_example().game;
  if (source == "kuhn") return gen_kuhn_poker();
  if (source.rfind("random:", 0) == 0) {
    std::stringstream ss(source.substr(7));
    std::string part;
    std::vector<long long> vals;
    while (std::getline(ss, part, ':')) vals.push_back(std::stoll(part));
    std::uint64_t seed = vals.empty() ? 1 : static_cast<std::uint64_t>(vals[0]);
    int m = vals.size() > 1 ? static_cast<int>(vals[1]) : 2;
    int H = vals.size() > 2 ? static_cast<int>(vals[2]) : 2;
    int A = vals.size() > 3 ? static_cast<int>(vals[3]) : 2;
    int n1 = vals.size() > 4 ? static_cast<int>(vals[4]) : 1;
    return gen_random_game(seed, m, H, A, n1);
  }
  std::ifstream in(source);
  if (!in) throw Error("cannot open game file: " + source);
  nlohmann::json spec;
  in >> spec;
  return TreeGame::validate(spec);
}

namespace {

struct Row {
  std::string digest;
  std::string mode;
  int K;
  long long t;
  std::uint64_t seed;
  int player;
  double gap;
  double regret;
  long long episodes;
  long long wall_ms;

  bool operator<(const Row& o) const {
    return std::tie(K, seed, t, player) < std::tie(o.K, o.seed, o.t, o.player);
  }
};

std::vector<long long> checkpoint_schedule(long long rounds) {
  std::vector<long long> ticks;
  for (long long t = 16; t < rounds; t *= 2) ticks.push_back(t);
  if (ticks.empty() || ticks.back() != rounds) ticks.push_back(rounds);
  return ticks;
}

CorrelatedPolicy thinned_average(const std::vector<ProductPolicy>& policies,
                                 long long upto, int max_mixture,
                                 std::uint64_t subsample_seed) {
  CorrelatedPolicy avg;
  if (upto <= max_mixture) {
    for (long long t = 0; t < upto; ++t) {
      avg.components.push_back(policies[t]);
      avg.weights.push_back(1.0 / upto);
    }
  } else {
    // Seeded uniform subsample without replacement.
    Rng rng(subsample_seed + static_cast<std::uint64_t>(upto));
    std::vector<long long> idx(upto);
    for (long long t = 0; t < upto; ++t) idx[t] = t;
    for (int k = 0; k < max_mixture; ++k) {
      long long pick = k + static_cast<long long>(rng.uniform() * (upto - k));
      std::swap(idx[k], idx[pick]);
      avg.components.push_back(policies[idx[k]]);
      avg.weights.push_back(1.0 / max_mixture);
    }
  }
  avg.refresh_purity();
  return avg;
}

int thread_cap() {
  if (const char* env = std::getenv("KEFCE_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

}  // namespace

void run_experiment(const ExperimentConfig& cfg) {
  if (cfg.k_list.empty()) throw RangeError("empty K list");
  if (cfg.rounds < 1) throw RangeError("rounds must be >= 1");
  TreeGame game = load_game_source(cfg.game_source);
  std::string digest = game.digest();

  struct Cell {
    int K;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (int K : cfg.k_list)
    for (std::uint64_t seed : cfg.seeds) cells.push_back({K, seed});

  std::vector<Row> rows;
  std::mutex mu;
  std::atomic<std::size_t> cursor{0};
  std::exception_ptr failure;
  auto worker = [&]() {
    while (true) {
      std::size_t c = cursor.fetch_add(1);
      if (c >= cells.size()) break;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (failure) break;
      }
      const Cell& cell = cells[c];
      try {
      auto start = std::chrono::steady_clock::now();
      std::vector<ProductPolicy> policies;
      long long per_round_episodes = 0;
      if (cfg.mode == "bandit") {
        RateOptions rates{cfg.eta};
        auto run = run_kefr_bandit(game, cell.K, cfg.rounds, cfg.failure_prob,
                                   cell.seed, rates);
        policies = std::move(run.policies);
        per_round_episodes = game.num_players() *
                             episodes_per_round(game.horizon(), cell.K);
      } else {
        RateOptions rates{cfg.eta};
        auto run = run_kefr_full(game, cell.K, cfg.rounds, rates);
        policies = std::move(run.policies);
      }
      std::vector<Row> local;
      for (long long t : checkpoint_schedule(cfg.rounds)) {
        CorrelatedPolicy avg =
            thinned_average(policies, t, cfg.max_mixture, cfg.subsample_seed);
        GapReport rep = kefce_gap(game, avg, cell.K);
        auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
        for (int i = 0; i < game.num_players(); ++i) {
          Row row;
          row.digest = digest;
          row.mode = cfg.mode;
          row.K = cell.K;
          row.t = t;
          row.seed = cell.seed;
          row.player = i;
          row.gap = rep.per_player[i];
          row.regret = rep.per_player[i] * t;
          row.episodes = cfg.mode == "bandit" ? per_round_episodes * t : 0;
          row.wall_ms = cfg.include_timing ? elapsed : 0;
          local.push_back(std::move(row));
        }
      }
      std::lock_guard<std::mutex> lock(mu);
      for (auto& r : local) rows.push_back(std::move(r));
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  int nthreads = std::min<int>(thread_cap(), static_cast<int>(cells.size()));
  std::vector<std::thread> pool;
  for (int k = 0; k < nthreads; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  std::sort(rows.begin(), rows.end());

  std::ofstream out(cfg.out_path);
  if (!out) throw Error("cannot open output file: " + cfg.out_path);
  out << "# source=" << cfg.game_source << " digest=" << digest;
  if (cfg.game_source == "kuhn") out << " reward_rescale=chips=(4*r-2)";
  out << "\n";
  out << "game_digest,mode,K,T_checkpoint,seed,player,gap,regret,episodes,wall_ms\n";
  char buf[64];
  for (const Row& r : rows) {
    out << r.digest << ',' << r.mode << ',' << r.K << ',' << r.t << ',' << r.seed << ','
        << r.player << ',';
    std::snprintf(buf, sizeof buf, "%.12g", r.gap);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.12g", r.regret);
    out << buf << ',' << r.episodes << ',' << r.wall_ms << "\n";
  }
  out.flush();
  // Completed cells are already on disk when a cell failed.
  if (failure) std::rethrow_exception(failure);
}

}  // namespace kefce
