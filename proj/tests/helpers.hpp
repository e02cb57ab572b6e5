#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ssaqn/game.hpp"
#include "ssaqn/gamefmt.hpp"

namespace ssaqn::testing {

inline std::string asset_path(const std::string& rel) {
  return std::string(SSAQN_ASSETS_DIR) + "/" + rel;
}

// Independent exhaustive search for deterministic games: best over all simple
// paths of (ending reward + step_penalty * interior steps), against the
// truncation value max_steps * step_penalty. Cycles never pay off with a
// non-positive step penalty, so simple paths suffice.
inline double dfs_optimal(const GameSpec& game) {
  std::set<std::string> visited;

  // best total from a non-terminal state with `remaining` moves left; a move
  // into a terminal pays only the ending, any other move pays step_penalty
  std::function<double(const std::string&, int)> go = [&](const std::string& id,
                                                          int remaining) -> double {
    if (remaining == 0) return 0.0;
    const StateSpec& state = game.state(id);
    visited.insert(id);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& action : state.actions) {
      const std::string& target = action.transitions.front().target;
      const StateSpec& next = game.state(target);
      if (next.terminal)
        best = std::max(best, terminal_reward(game, next));
      else if (!visited.count(target))
        best = std::max(best, game.step_penalty + go(target, remaining - 1));
    }
    visited.erase(id);
    return best;
  };

  const StateSpec& start = game.state(game.start_state);
  if (start.terminal) return terminal_reward(game, start);
  double truncation = 0.0;  // wander until the step budget runs out
  for (int i = 0; i < game.max_steps; ++i) truncation = game.step_penalty + truncation;
  return std::max(truncation, go(game.start_state, game.max_steps));
}

// Expected episode reward of the uniform-random policy, by dynamic
// programming over (state, steps remaining).
inline double random_policy_expectation(const GameSpec& game) {
  std::vector<const StateSpec*> states;
  std::map<std::string, int> index;
  for (const auto& [id, s] : game.states) {
    index[id] = static_cast<int>(states.size());
    states.push_back(&s);
  }
  const int n = static_cast<int>(states.size());
  std::vector<double> prev(n, 0.0), cur(n, 0.0);
  for (int t = 1; t <= game.max_steps; ++t) {
    for (int s = 0; s < n; ++s) {
      if (states[s]->terminal) {
        cur[s] = 0.0;
        continue;
      }
      double total = 0.0;
      for (const auto& action : states[s]->actions) {
        for (const auto& tr : action.transitions) {
          int target = index.at(tr.target);
          if (states[target]->terminal)
            total += tr.probability * terminal_reward(game, *states[target]);
          else
            total += tr.probability * (game.step_penalty + prev[target]);
        }
      }
      cur[s] = total / states[s]->actions.size();
    }
    std::swap(prev, cur);
  }
  return prev[index.at(game.start_state)];
}

// Deterministic chain of `length` steps ending in a single terminal reward.
inline GameSpec make_chain(int length, double ending_reward, double step_penalty = -0.1,
                           double r_max = 20.0) {
  GameSpec game;
  game.id = "chain";
  game.title = "chain";
  game.max_steps = length + 2;
  game.r_max = r_max;
  game.step_penalty = step_penalty;
  for (int i = 0; i < length; ++i) {
    StateSpec s;
    s.id = "c" + std::to_string(i);
    s.description_variants = {"room number " + std::to_string(i)};
    ActionSpec a;
    a.description_variants = {"walk onward from room " + std::to_string(i)};
    a.transitions = {{i + 1 < length ? "c" + std::to_string(i + 1) : "goal", 1.0}};
    s.actions.push_back(a);
    game.states.emplace(s.id, s);
  }
  StateSpec goal;
  goal.id = "goal";
  goal.description_variants = {"the goal at last"};
  goal.terminal = true;
  goal.ending_reward = ending_reward;
  game.states.emplace("goal", goal);
  game.start_state = "c0";
  return game;
}

}  // namespace ssaqn::testing
