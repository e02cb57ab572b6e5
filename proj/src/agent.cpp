#include "ssaqn/agent.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace ssaqn {

double scale_q(double cs, double r_max) { return cs * r_max; }

double normalize_target(double q_target, double r_max) {
  return std::clamp(q_target / r_max, -1.0, 1.0);
}

Agent::Agent(Parameters params, Vocabulary vocab, double history_coefficient)
    : params_(std::move(params)), vocab_(std::move(vocab)), history_coeff_(history_coefficient) {
  assert(vocab_.size() == params_.config.vocab_size);
}

void Agent::invalidate_cache() {
  state_cache_.clear();
  action_cache_.clear();
}

std::vector<int> Agent::encode_text(const std::string& text) const {
  return encode(vocab_, preprocess(text));
}

const std::vector<double>& Agent::state_branch(const std::string& key) const {
  auto it = state_cache_.find(key);
  if (it != state_cache_.end()) return it->second;
  BranchCache branch = branch_forward(params_, encode(vocab_, preprocess(key)),
                                      params_.w_state, params_.b_state);
  return state_cache_.emplace(key, std::move(branch.out)).first->second;
}

const std::vector<double>& Agent::action_branch(const std::string& key) const {
  auto it = action_cache_.find(key);
  if (it != action_cache_.end()) return it->second;
  BranchCache branch = branch_forward(params_, encode(vocab_, preprocess(key)),
                                      params_.w_action, params_.b_action);
  return action_cache_.emplace(key, std::move(branch.out)).first->second;
}

std::vector<double> Agent::q_values(const std::string& state_text,
                                    const std::vector<std::string>& action_texts,
                                    double r_max) const {
  const std::vector<double>& x = state_branch(preprocess_join(state_text));
  std::vector<double> qs;
  qs.reserve(action_texts.size());
  for (const auto& text : action_texts) {
    const std::vector<double>& y = action_branch(preprocess_join(text));
    double cs = cosine_similarity(x, y);
    assert(cs >= -1.0 - 1e-12 && cs <= 1.0 + 1e-12);
    qs.push_back(scale_q(cs, r_max));
  }
  return qs;
}

double Agent::max_q(const std::string& state_text, const std::vector<std::string>& action_texts,
                    double r_max) const {
  std::vector<double> qs = q_values(state_text, action_texts, r_max);
  return *std::max_element(qs.begin(), qs.end());
}

int Agent::select_action(const Observation& obs, double r_max, double eps, HistoryLedger& ledger,
                         std::mt19937_64& rng) const {
  const auto& actions = obs.action_texts;
  std::string state_key = preprocess_join(obs.state_text);

  int chosen;
  if (eps > 0.0 &&
      static_cast<double>(rng()) / static_cast<double>(std::mt19937_64::max()) < eps) {
    chosen = static_cast<int>(rng() % actions.size());
  } else {
    std::vector<double> qs = q_values(obs.state_text, actions, r_max);
    chosen = 0;
    double best = -1e300;
    for (std::size_t i = 0; i < actions.size(); ++i) {
      double q_eff = qs[i] - history_coeff_ * ledger.count(state_key, preprocess_join(actions[i]));
      if (q_eff > best) {
        best = q_eff;
        chosen = static_cast<int>(i);
      }
    }
  }
  ledger.record(state_key, preprocess_join(actions[chosen]));
  return chosen;
}

std::pair<double, double> Agent::evaluate(const GameSpec& game, int runs, std::uint64_t seed) const {
  std::vector<double> rewards;
  rewards.reserve(runs);
  for (int run = 0; run < runs; ++run) {
    Simulator sim(game, seed + static_cast<std::uint64_t>(run));
    HistoryLedger ledger;
    std::mt19937_64 rng(seed ^ (0xabcd0000ULL + run));
    Observation obs = sim.reset();
    while (!obs.done) {
      int a = select_action(obs, game.r_max, 0.0, ledger, rng);
      obs = sim.step(a);
    }
    rewards.push_back(sim.episode_reward());
  }
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= rewards.size();
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= rewards.size();
  return {mean, std::sqrt(var)};
}

int Agent::greedy_episode_steps(const GameSpec& game, std::uint64_t seed) const {
  Simulator sim(game, seed);
  HistoryLedger ledger;
  std::mt19937_64 rng(seed ^ 0xabcd0000ULL);
  Observation obs = sim.reset();
  while (!obs.done) obs = sim.step(select_action(obs, game.r_max, 0.0, ledger, rng));
  return sim.steps_taken();
}

}  // namespace ssaqn
