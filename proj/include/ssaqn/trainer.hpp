#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ssaqn/agent.hpp"
#include "ssaqn/engine.hpp"
#include "ssaqn/game.hpp"

namespace ssaqn {

struct EmptyMemory : std::logic_error {
  EmptyMemory() : std::logic_error("sample_batch on empty replay memory") {}
};

struct VocabMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperienceTuple {
  std::string state_text;
  std::string action_text;
  double reward = 0.0;
  std::string next_state_text;
  std::vector<std::string> next_action_texts;  // empty iff terminal
  std::string game_id;
  double r_max = 0.0;

  bool terminal() const { return next_action_texts.empty(); }
};

// Fixed-capacity FIFO ring with an index of positive-reward entries.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  void store(ExperienceTuple exp);

  std::size_t size() const { return buffer_.size(); }
  std::size_t positive_count() const { return positives_.size(); }
  std::size_t capacity() const { return capacity_; }
  const ExperienceTuple& at(std::size_t i) const { return buffer_[i]; }

  // floor(p*b) tuples uniformly from the positive-reward index (with
  // replacement when it is smaller but non-empty), the rest uniformly from
  // the whole memory.
  std::vector<ExperienceTuple> sample_batch(std::size_t b, double p, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::deque<ExperienceTuple> buffer_;
  std::deque<std::uint64_t> positives_;  // absolute sequence numbers
  std::uint64_t next_seq_ = 0;
};

struct TrainConfig {
  int episodes = 0;
  int batch_size = 256;
  double prioritized_fraction = 0.25;
  double gamma = 0.95;
  double epsilon = 1.0;
  double epsilon_decay = 0.99;
  double learning_rate = 1e-4;
  int eval_every = 1;
  int eval_runs = 1;
  std::size_t replay_capacity = 500000;
  double history_coefficient = -1.0;  // < 0 means 2 * r_max of each game
  std::uint64_t seed = 0;
};

struct MetricsRow {
  int episode = 0;
  std::string game_id;
  double eval_mean = 0.0;
  double eval_std = 0.0;
  double epsilon = 0.0;
  int steps = 0;
  double loss = 0.0;
};

std::string metrics_to_csv(const std::vector<MetricsRow>& rows);

// Bellman target in Q units: r for terminal tuples, else
// r + gamma * max_a' Q(s', a').
double compute_target(const ExperienceTuple& exp, const Agent& agent, double gamma);

struct EpisodeResult {
  std::vector<ExperienceTuple> experiences;
  double reward = 0.0;
  int steps = 0;
};

// One pi_eps rollout; emits one experience per step.
EpisodeResult run_episode(const Agent& agent, Simulator& sim, double eps, HistoryLedger& ledger,
                          std::mt19937_64& rng);

struct TrainResult {
  Agent agent;
  std::vector<MetricsRow> metrics;
};

// The full training loop: per episode one rollout of each train game, one
// prioritised batch, one RMSProp step, epsilon decay, periodic greedy
// evaluation of every eval game. Fully reproducible from (games, config).
TrainResult train(const std::vector<GameSpec>& train_games, const std::vector<GameSpec>& eval_games,
                  const TrainConfig& config, const Vocabulary& vocab,
                  const std::optional<Checkpoint>& initial = std::nullopt);

}  // namespace ssaqn
