#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssaqn/game.hpp"

namespace ssaqn {

struct StepAfterDone : std::logic_error {
  StepAfterDone() : std::logic_error("step() called on a finished episode") {}
};

struct IndexOutOfRange : std::out_of_range {
  explicit IndexOutOfRange(int index) : std::out_of_range("action index out of range: " + std::to_string(index)) {}
};

struct NoRuleMatched : std::runtime_error {
  explicit NoRuleMatched(const std::string& text)
      : std::runtime_error("no ending rule matched final text: " + text) {}
};

struct Observation {
  std::string state_text;
  std::vector<std::string> action_texts;  // shuffled presentation order
  double last_reward = 0.0;
  bool done = false;
  int steps_taken = 0;
};

// Reward of the first rule whose match is a (case-insensitive) substring of
// the final text. Linear rules evaluate scale * X + offset on the first
// integer captured after the matched substring. Throws NoRuleMatched.
double classify_ending(const std::vector<EndingRule>& rules, const std::string& final_text);

// Uniformly random permutation of the action texts; permutation[i] is the
// canonical index of the action presented at slot i.
std::pair<std::vector<std::string>, std::vector<int>> present_actions(
    const std::vector<std::string>& texts, std::mt19937_64& rng);

// One running episode over an immutable GameSpec. Single-threaded; distinct
// simulators over the same spec may run in parallel.
class Simulator {
 public:
  Simulator(const GameSpec& game, std::uint64_t seed);

  Observation reset();
  Observation step(int presented_index);

  const GameSpec& game() const { return *game_; }
  bool done() const { return done_; }
  int steps_taken() const { return steps_taken_; }
  double episode_reward() const { return episode_reward_; }
  const std::string& current_state() const { return current_; }
  const std::vector<int>& presentation_permutation() const { return permutation_; }

 private:
  Observation observe(double last_reward);

  const GameSpec* game_;
  std::mt19937_64 rng_;
  std::string current_;
  int steps_taken_ = 0;
  bool done_ = true;
  double episode_reward_ = 0.0;
  std::vector<int> permutation_;
};

}  // namespace ssaqn
