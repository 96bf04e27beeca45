#pragma once

#include <map>
#include <optional>
#include <vector>

#include <json.hpp>

#include "kefce/game.hpp"
#include "kefce/policy.hpp"

namespace kefce {

// fill(I, n): I plus the smallest n - |I| positive integers not in I.
// Steps are 1-based here, matching the index-set convention.
std::vector<int> fill(std::vector<int> index_set, int n);

// A recommendation history at an infoset. Only the deviating entries are
// stored; the rest are forced to the infoset's ancestor actions. Steps `k`
// are 0-based layer indices.
struct Rechistory {
  enum class Kind { TypeI, TypeII };
  Kind kind = Kind::TypeI;
  int length = 0;  // |b|: layer for Type-I, position after the K-th deviation for Type-II
  std::vector<std::pair<int, Action>> deviations;  // (step k, b_k != a_k), sorted by k

  std::vector<int> key() const;
  // Reconstructs the full action list against the ancestor actions of `x`.
  std::vector<Action> expand(const Infoset& x) const;
};

struct RechistorySet {
  std::vector<Rechistory> type1, type2;
  std::map<std::vector<int>, std::pair<Rechistory::Kind, int>> index;

  int lookup_type1(const Rechistory& r) const;
  int lookup_type2(const Rechistory& r) const;
};

// Enumerated rechistory sets of one player for a fixed deviation budget K.
class RechistoryCache {
 public:
  RechistoryCache(const TreeGame& game, int player, int K,
                  long long budget = 1'000'000);

  const TreeGame& game() const { return *game_; }
  int player() const { return player_; }
  int K() const { return K_; }  // clamped to the horizon
  const RechistorySet& at(int layer, int infoset) const { return sets_[layer][infoset]; }
  long long total_entries() const { return total_; }

 private:
  const TreeGame* game_;
  int player_;
  int K_;
  long long total_ = 0;
  std::vector<std::vector<RechistorySet>> sets_;
};

// Classifies an explicit action list against the ancestors of (layer, infoset).
// Returns nullopt when the list matches neither rechistory pattern. Throws
// LengthError when |b| >= layer + 1.
std::optional<Rechistory> classify(const TreeGame& game, int player, int layer,
                                   int infoset, const std::vector<Action>& b, int K);

// A deterministic deviation rule over all rechistories of one player: a swap
// table per Type-I entry and a fixed action per Type-II entry, aligned with
// the cache's enumeration order.
struct StrategyModification {
  int player = 0;
  int K = 0;
  std::vector<std::vector<std::vector<std::vector<Action>>>> type1;  // [layer][x][r][rec]
  std::vector<std::vector<std::vector<Action>>> type2;               // [layer][x][r]

  static StrategyModification identity(const RechistoryCache& cache);
  std::string digest() const;
  nlohmann::json to_json(const RechistoryCache& cache) const;
  static StrategyModification from_json(const RechistoryCache& cache,
                                        const nlohmann::json& j);
};

// Plays one episode of (phi o pi_i) x pi_{-i} per the modified-execution
// protocol: observe and swap at Type-I nodes, act blind at Type-II nodes.
Trajectory execute_modified(const TreeGame& game, const RechistoryCache& cache,
                            const StrategyModification& phi, const ProductPolicy& pi,
                            Rng& rng);

// Exact sequence form (phi o pi_i)_{1:h}(x_h, a_h) via the two-sum closed form
// over Type-I and Type-II rechistories.
double modified_sequence_form(const TreeGame& game, const RechistoryCache& cache,
                              const StrategyModification& phi,
                              const BehavioralPolicy& pi, int layer, int infoset,
                              Action a);

}  // namespace kefce
