#pragma once

#include <map>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ssaqn/engine.hpp"
#include "ssaqn/nn.hpp"
#include "ssaqn/textproc.hpp"

namespace ssaqn {

// cs in [-1,1] scaled to game units.
double scale_q(double cs, double r_max);

// Q target mapped back to the cosine head's scale, clamped to [-1,1].
double normalize_target(double q_target, double r_max);

// Within-episode multiset of selected (state text, action text) pairs,
// keyed on preprocessed texts. Cleared at episode start.
class HistoryLedger {
 public:
  void clear() { counts_.clear(); }
  void record(const std::string& state_key, const std::string& action_key) {
    ++counts_[state_key + "\n" + action_key];
  }
  int count(const std::string& state_key, const std::string& action_key) const {
    auto it = counts_.find(state_key + "\n" + action_key);
    return it == counts_.end() ? 0 : it->second;
  }

 private:
  std::unordered_map<std::string, int> counts_;
};

// Plays with the network: one cached state-branch pass plus one action-branch
// pass per action, history-penalised epsilon-greedy selection.
class Agent {
 public:
  Agent(Parameters params, Vocabulary vocab, double history_coefficient);

  const Parameters& params() const { return params_; }
  Parameters& mutable_params() { return params_; }
  const Vocabulary& vocab() const { return vocab_; }
  const NetworkConfig& config() const { return params_.config; }
  double history_coefficient() const { return history_coeff_; }
  void set_history_coefficient(double c) { history_coeff_ = c; }

  // Must be called after any parameter update; drops the branch caches.
  void invalidate_cache();

  std::vector<int> encode_text(const std::string& text) const;

  // One Q per action text, each |Q| <= r_max.
  std::vector<double> q_values(const std::string& state_text,
                               const std::vector<std::string>& action_texts, double r_max) const;

  double max_q(const std::string& state_text, const std::vector<std::string>& action_texts,
               double r_max) const;

  // With probability eps a uniform index, otherwise argmax of
  // Q_i - c * ledger_count; ties to the lowest presented index. The selected
  // pair is recorded in the ledger either way.
  int select_action(const Observation& obs, double r_max, double eps, HistoryLedger& ledger,
                    std::mt19937_64& rng) const;

  // `runs` greedy episodes (eps = 0, ledger active); (sample mean,
  // population std) of episode rewards. Never mutates parameters.
  std::pair<double, double> evaluate(const GameSpec& game, int runs, std::uint64_t seed) const;

  // Steps taken by one greedy episode; used for metrics.
  int greedy_episode_steps(const GameSpec& game, std::uint64_t seed) const;

 private:
  const std::vector<double>& state_branch(const std::string& key) const;
  const std::vector<double>& action_branch(const std::string& key) const;

  Parameters params_;
  Vocabulary vocab_;
  double history_coeff_;

  mutable std::unordered_map<std::string, std::vector<double>> state_cache_;
  mutable std::unordered_map<std::string, std::vector<double>> action_cache_;
};

}  // namespace ssaqn
