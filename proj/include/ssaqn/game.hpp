#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ssaqn {

struct TransitionSpec {
  std::string target;
  double probability = 1.0;
};

struct ActionSpec {
  std::vector<std::string> description_variants;
  std::vector<TransitionSpec> transitions;
};

struct StateSpec {
  std::string id;
  std::vector<std::string> description_variants;
  bool terminal = false;
  std::optional<double> ending_reward;
  std::vector<ActionSpec> actions;
};

// Matches a substring of the final-state text and yields either a fixed
// reward or scale * X + offset on the first integer captured after the match.
struct EndingRule {
  std::string match;
  bool linear = false;
  double reward = 0.0;  // fixed form
  double scale = 0.0;   // linear form
  double offset = 0.0;
};

// A complete, explicit text-game MDP. Immutable after load.
struct GameSpec {
  std::string id;
  std::string title;
  std::string start_state;
  int max_steps = 0;
  double r_max = 0.0;
  double step_penalty = -0.1;
  std::map<std::string, StateSpec> states;
  std::vector<EndingRule> ending_rules;

  const StateSpec& state(const std::string& state_id) const { return states.at(state_id); }
};

}  // namespace ssaqn
