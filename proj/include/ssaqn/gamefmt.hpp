#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ssaqn/game.hpp"
#include "ssaqn/textproc.hpp"

namespace ssaqn {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Carries every violation found, one message per line.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::vector<std::string>& violations);
  std::vector<std::string> violations;
};

struct InfeasibleParams : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Parses and fully validates a game document (JSON, format 1).
GameSpec load_game(const std::string& document);
GameSpec load_game_file(const std::string& path);

// Canonical serialization; load_game(save_game(g)) round-trips.
std::string save_game(const GameSpec& game);

// Loads a standalone ending-rule fixture file (JSON array of rules).
std::vector<EndingRule> load_ending_rules(const std::string& document);
std::vector<EndingRule> load_ending_rules_file(const std::string& path);

struct SyntheticParams {
  int n_states = 12;
  double branching = 2.0;  // average actions per non-terminal state
  int n_endings = 3;
  int lexicon_size = 40;
  double cycle_probability = 0.2;
  bool stochastic_transitions = false;
  int description_variant_count = 1;
  int avg_words_per_description = 6;
  std::uint64_t seed = 0;
  // 0 derives the lexicon from `seed`; a shared non-zero value lets several
  // games draw from the same lexicon.
  std::uint64_t lexicon_seed = 0;
};

// Deterministic in the seed. Plants exactly one r_max ending reachable from
// the start and grades the remaining endings downward.
GameSpec generate_synthetic(const SyntheticParams& params);

struct OracleResult {
  double optimal_expected_reward = 0.0;
  // (state id, steps remaining) -> canonical action index
  std::map<std::pair<std::string, int>, int> optimal_action;
};

// Exact finite-horizon value iteration over (state, steps remaining), no
// discounting. Non-terminal transitions collect step_penalty, terminal ones
// only the ending reward.
OracleResult optimal_reward(const GameSpec& game);

// Expected terminal reward of a state: explicit ending_reward, or the mean of
// classify_ending over its description variants.
double terminal_reward(const GameSpec& game, const StateSpec& state);

// Union of preprocess() over every description in every game, deduplicated,
// lexicographic order.
std::vector<std::string> enumerate_vocabulary(const std::vector<GameSpec>& games);

Vocabulary build_vocabulary(const std::vector<GameSpec>& games);

}  // namespace ssaqn
