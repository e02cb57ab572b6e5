#include "ssaqn/engine.hpp"

#include <algorithm>
#include <cctype>

namespace ssaqn {

namespace {

std::string lowercase(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::size_t rand_index(std::mt19937_64& rng, std::size_t n) { return rng() % n; }

const std::string& pick_variant(const std::vector<std::string>& variants, std::mt19937_64& rng) {
  return variants[rand_index(rng, variants.size())];
}

}  // namespace

double classify_ending(const std::vector<EndingRule>& rules, const std::string& final_text) {
  std::string text = lowercase(final_text);
  for (const auto& rule : rules) {
    auto pos = text.find(lowercase(rule.match));
    if (pos == std::string::npos) continue;
    if (!rule.linear) return rule.reward;
    // capture the first integer after the matched substring
    std::size_t i = pos + rule.match.size();
    while (i < text.size() && !std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
    long long x = 0;
    if (i >= text.size()) throw NoRuleMatched(final_text);
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      x = x * 10 + (text[i] - '0');
      ++i;
    }
    return rule.scale * static_cast<double>(x) + rule.offset;
  }
  throw NoRuleMatched(final_text);
}

std::pair<std::vector<std::string>, std::vector<int>> present_actions(
    const std::vector<std::string>& texts, std::mt19937_64& rng) {
  std::vector<int> perm(texts.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
  // Fisher-Yates
  for (std::size_t i = perm.size(); i > 1; --i) {
    std::swap(perm[i - 1], perm[rand_index(rng, i)]);
  }
  std::vector<std::string> shuffled(texts.size());
  for (std::size_t i = 0; i < perm.size(); ++i) shuffled[i] = texts[perm[i]];
  return {std::move(shuffled), std::move(perm)};
}

Simulator::Simulator(const GameSpec& game, std::uint64_t seed) : game_(&game), rng_(seed) {}

Observation Simulator::observe(double last_reward) {
  const StateSpec& state = game_->state(current_);
  Observation obs;
  obs.state_text = pick_variant(state.description_variants, rng_);
  obs.last_reward = last_reward;
  obs.done = done_;
  obs.steps_taken = steps_taken_;
  if (!done_) {
    std::vector<std::string> rendered;
    rendered.reserve(state.actions.size());
    for (const auto& action : state.actions) rendered.push_back(pick_variant(action.description_variants, rng_));
    auto [texts, perm] = present_actions(rendered, rng_);
    obs.action_texts = std::move(texts);
    permutation_ = std::move(perm);
  } else {
    permutation_.clear();
  }
  return obs;
}

Observation Simulator::reset() {
  current_ = game_->start_state;
  steps_taken_ = 0;
  episode_reward_ = 0.0;
  done_ = game_->state(current_).terminal;
  return observe(0.0);
}

Observation Simulator::step(int presented_index) {
  if (done_) throw StepAfterDone();
  if (presented_index < 0 || presented_index >= static_cast<int>(permutation_.size()))
    throw IndexOutOfRange(presented_index);

  const StateSpec& state = game_->state(current_);
  const ActionSpec& action = state.actions[permutation_[presented_index]];

  // sample a transition by its probabilities
  const std::string* target = &action.transitions.back().target;
  if (action.transitions.size() > 1) {
    double u = static_cast<double>(rng_()) / static_cast<double>(std::mt19937_64::max());
    double acc = 0.0;
    for (const auto& t : action.transitions) {
      acc += t.probability;
      if (u < acc) {
        target = &t.target;
        break;
      }
    }
  }

  current_ = *target;
  ++steps_taken_;
  const StateSpec& next = game_->state(current_);

  double reward;
  if (next.terminal) {
    done_ = true;
    if (next.ending_reward) {
      reward = *next.ending_reward;
      episode_reward_ += reward;
      // the terminal description is still rendered through observe()
      Observation obs = observe(reward);
      return obs;
    }
    // reward derived from the rendered final text
    Observation obs = observe(0.0);
    reward = classify_ending(game_->ending_rules, obs.state_text);
    obs.last_reward = reward;
    episode_reward_ += reward;
    return obs;
  }

  reward = game_->step_penalty;
  episode_reward_ += reward;
  if (steps_taken_ >= game_->max_steps) done_ = true;  // truncation, no terminal reward
  return observe(reward);
}

}  // namespace ssaqn
