#include "ssaqn/gamefmt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ssaqn/engine.hpp"

namespace ssaqn {

using nlohmann::json;

ValidationError::ValidationError(const std::vector<std::string>& v)
    : std::runtime_error([&] {
        std::string msg = "invalid game:";
        for (const auto& s : v) msg += "\n  - " + s;
        return msg;
      }()),
      violations(v) {}

namespace {

constexpr double kProbTolerance = 1e-9;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

EndingRule rule_from_json(const json& j) {
  EndingRule rule;
  rule.match = j.at("match").get<std::string>();
  if (j.contains("scale")) {
    rule.linear = true;
    rule.scale = j.at("scale").get<double>();
    rule.offset = j.value("offset", 0.0);
  } else {
    rule.reward = j.at("reward").get<double>();
  }
  return rule;
}

json rule_to_json(const EndingRule& rule) {
  json j;
  j["match"] = rule.match;
  if (rule.linear) {
    j["scale"] = rule.scale;
    j["offset"] = rule.offset;
  } else {
    j["reward"] = rule.reward;
  }
  return j;
}

void validate(const GameSpec& game, std::vector<std::string>& violations) {
  if (game.max_steps <= 0) violations.push_back("max_steps must be positive");
  if (game.r_max <= 0) violations.push_back("r_max must be positive");
  if (game.step_penalty > 0) violations.push_back("step_penalty must be <= 0");
  if (!game.states.count(game.start_state))
    violations.push_back("start_state '" + game.start_state + "' not found");

  for (const auto& [id, state] : game.states) {
    if (state.description_variants.empty())
      violations.push_back("state '" + id + "' has no description variants");
    if (state.terminal) {
      if (!state.actions.empty()) violations.push_back("terminal state '" + id + "' has actions");
      if (state.ending_reward) {
        if (std::abs(*state.ending_reward) > game.r_max)
          violations.push_back("state '" + id + "' ending reward exceeds r_max");
      } else {
        for (const auto& text : state.description_variants) {
          try {
            double r = classify_ending(game.ending_rules, text);
            if (std::abs(r) > game.r_max)
              violations.push_back("state '" + id + "' classified reward exceeds r_max");
          } catch (const NoRuleMatched&) {
            violations.push_back("terminal state '" + id + "' has no ending reward and no rule matches");
          }
        }
      }
    } else if (state.actions.empty()) {
      violations.push_back("non-terminal state '" + id + "' has no actions");
    }
    for (std::size_t a = 0; a < state.actions.size(); ++a) {
      const auto& action = state.actions[a];
      std::string where = "state '" + id + "' action " + std::to_string(a);
      if (action.description_variants.empty())
        violations.push_back(where + " has no description variants");
      if (action.transitions.empty()) {
        violations.push_back(where + " has no transitions");
        continue;
      }
      double sum = 0.0;
      for (const auto& t : action.transitions) {
        if (t.probability <= 0.0 || t.probability > 1.0)
          violations.push_back(where + " has probability out of (0,1]");
        sum += t.probability;
        if (!game.states.count(t.target))
          violations.push_back(where + " targets unknown state '" + t.target + "'");
      }
      if (std::abs(sum - 1.0) > kProbTolerance) {
        std::ostringstream ss;
        ss << where << ": probabilities sum to " << sum;
        violations.push_back(ss.str());
      }
    }
  }

  if (violations.empty()) {
    OracleResult oracle = optimal_reward(game);
    if (std::abs(oracle.optimal_expected_reward) > game.r_max + kProbTolerance)
      violations.push_back("optimal cumulative reward exceeds r_max");
  }
}

std::size_t rand_index(std::mt19937_64& rng, std::size_t n) { return rng() % n; }

}  // namespace

GameSpec load_game(const std::string& document) {
  json j;
  try {
    j = json::parse(document);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed game document: ") + e.what());
  }

  GameSpec game;
  try {
    if (j.value("format", 0) != 1) throw ParseError("unsupported or missing format version");
    game.id = j.at("id").get<std::string>();
    game.title = j.value("title", game.id);
    game.start_state = j.at("start_state").get<std::string>();
    game.max_steps = j.at("max_steps").get<int>();
    game.r_max = j.at("r_max").get<double>();
    game.step_penalty = j.value("step_penalty", -0.1);
    for (const auto& [id, js] : j.at("states").items()) {
      StateSpec state;
      state.id = id;
      state.description_variants = js.at("description_variants").get<std::vector<std::string>>();
      state.terminal = js.value("terminal", false);
      if (js.contains("ending_reward")) state.ending_reward = js.at("ending_reward").get<double>();
      for (const auto& ja : js.value("actions", json::array())) {
        ActionSpec action;
        action.description_variants = ja.at("description_variants").get<std::vector<std::string>>();
        for (const auto& jt : ja.at("transitions")) {
          action.transitions.push_back({jt.at("target").get<std::string>(), jt.value("p", 1.0)});
        }
        state.actions.push_back(std::move(action));
      }
      game.states.emplace(id, std::move(state));
    }
    for (const auto& jr : j.value("ending_rules", json::array()))
      game.ending_rules.push_back(rule_from_json(jr));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed game document: ") + e.what());
  }

  std::vector<std::string> violations;
  validate(game, violations);
  if (!violations.empty()) throw ValidationError(violations);
  return game;
}

GameSpec load_game_file(const std::string& path) { return load_game(read_file(path)); }

std::string save_game(const GameSpec& game) {
  json j;
  j["format"] = 1;
  j["id"] = game.id;
  j["title"] = game.title;
  j["start_state"] = game.start_state;
  j["max_steps"] = game.max_steps;
  j["r_max"] = game.r_max;
  j["step_penalty"] = game.step_penalty;
  json states = json::object();
  for (const auto& [id, state] : game.states) {
    json js;
    js["description_variants"] = state.description_variants;
    js["terminal"] = state.terminal;
    if (state.ending_reward) js["ending_reward"] = *state.ending_reward;
    json actions = json::array();
    for (const auto& action : state.actions) {
      json ja;
      ja["description_variants"] = action.description_variants;
      json transitions = json::array();
      for (const auto& t : action.transitions)
        transitions.push_back({{"target", t.target}, {"p", t.probability}});
      ja["transitions"] = transitions;
      actions.push_back(ja);
    }
    js["actions"] = actions;
    states[id] = js;
  }
  j["states"] = states;
  json rules = json::array();
  for (const auto& rule : game.ending_rules) rules.push_back(rule_to_json(rule));
  j["ending_rules"] = rules;
  return j.dump(2) + "\n";
}

std::vector<EndingRule> load_ending_rules(const std::string& document) {
  json j;
  try {
    j = json::parse(document);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed rules document: ") + e.what());
  }
  std::vector<EndingRule> rules;
  try {
    for (const auto& jr : j) rules.push_back(rule_from_json(jr));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed rules document: ") + e.what());
  }
  return rules;
}

std::vector<EndingRule> load_ending_rules_file(const std::string& path) {
  return load_ending_rules(read_file(path));
}

double terminal_reward(const GameSpec& game, const StateSpec& state) {
  if (state.ending_reward) return *state.ending_reward;
  double sum = 0.0;
  for (const auto& text : state.description_variants) sum += classify_ending(game.ending_rules, text);
  return sum / static_cast<double>(state.description_variants.size());
}

OracleResult optimal_reward(const GameSpec& game) {
  std::vector<const StateSpec*> states;
  std::map<std::string, int> index;
  for (const auto& [id, state] : game.states) {
    index[id] = static_cast<int>(states.size());
    states.push_back(&state);
  }
  const int n = static_cast<int>(states.size());

  std::vector<double> terminal_value(n, 0.0);
  for (int s = 0; s < n; ++s)
    if (states[s]->terminal) terminal_value[s] = terminal_reward(game, *states[s]);

  OracleResult result;
  std::vector<double> prev(n, 0.0), cur(n, 0.0);
  for (int s = 0; s < n; ++s)
    if (states[s]->terminal) prev[s] = terminal_value[s];

  for (int t = 1; t <= game.max_steps; ++t) {
    for (int s = 0; s < n; ++s) {
      const StateSpec& state = *states[s];
      if (state.terminal) {
        cur[s] = terminal_value[s];
        continue;
      }
      double best = 0.0;
      int best_action = -1;
      for (std::size_t a = 0; a < state.actions.size(); ++a) {
        double value = 0.0;
        for (const auto& tr : state.actions[a].transitions) {
          int target = index.at(tr.target);
          if (states[target]->terminal)
            value += tr.probability * terminal_value[target];
          else
            value += tr.probability * (game.step_penalty + prev[target]);
        }
        if (best_action < 0 || value > best) {
          best = value;
          best_action = static_cast<int>(a);
        }
      }
      cur[s] = best;
      result.optimal_action[{state.id, t}] = best_action;
    }
    std::swap(prev, cur);
  }

  int start = index.at(game.start_state);
  result.optimal_expected_reward = states[start]->terminal ? terminal_value[start] : prev[start];
  return result;
}

namespace {

std::string make_word(std::mt19937_64& rng) {
  static const std::string consonants = "bdfgklmnprstvz";
  static const std::string vowels = "aeiou";
  int syllables = 2 + static_cast<int>(rand_index(rng, 2));
  std::string word;
  for (int i = 0; i < syllables; ++i) {
    word += consonants[rand_index(rng, consonants.size())];
    word += vowels[rand_index(rng, vowels.size())];
  }
  return word;
}

std::vector<std::string> make_lexicon(std::uint64_t seed, int size) {
  std::mt19937_64 rng(seed);
  std::set<std::string> seen;
  std::vector<std::string> words;
  while (static_cast<int>(words.size()) < size) {
    std::string w = make_word(rng);
    if (seen.insert(w).second) words.push_back(w);
  }
  return words;
}

}  // namespace

GameSpec generate_synthetic(const SyntheticParams& params) {
  if (params.n_states < 3) throw InfeasibleParams("n_states must be >= 3");
  if (params.n_endings < 2) throw InfeasibleParams("n_endings must be >= 2");
  if (params.n_endings >= params.n_states)
    throw InfeasibleParams("n_endings must be smaller than n_states");
  if (params.lexicon_size < 4) throw InfeasibleParams("lexicon_size must be >= 4");
  if (params.branching < 1.0) throw InfeasibleParams("branching must be >= 1");
  if (params.cycle_probability < 0.0 || params.cycle_probability > 1.0)
    throw InfeasibleParams("cycle_probability must be in [0,1]");
  if (params.description_variant_count < 1 || params.avg_words_per_description < 2)
    throw InfeasibleParams("descriptions need at least one variant of at least two words");

  std::mt19937_64 rng(params.seed);
  std::uint64_t lexicon_seed = params.lexicon_seed ? params.lexicon_seed : params.seed + 0x9e3779b97f4a7c15ULL;
  std::vector<std::string> lexicon = make_lexicon(lexicon_seed, params.lexicon_size);
  const std::size_t L = lexicon.size();

  const int n_interior = params.n_states - params.n_endings;
  const double r_max = 10.0;
  const double penalty = -0.1;

  GameSpec game;
  game.id = "synthetic-" + std::to_string(params.seed);
  game.title = "Synthetic game " + std::to_string(params.seed);
  game.max_steps = std::min(100, std::max(10, 2 * n_interior));
  game.r_max = r_max;
  game.step_penalty = penalty;

  auto key_phrase = [&](std::size_t k) {
    return lexicon[k % L] + " " + lexicon[(k / L + k) % L];
  };
  auto make_description = [&](std::size_t key) {
    std::string text = key_phrase(key);
    for (int w = 2; w < params.avg_words_per_description; ++w)
      text += " " + lexicon[rand_index(rng, L)];
    return text;
  };
  auto make_variants = [&](std::size_t key) {
    std::vector<std::string> variants;
    for (int v = 0; v < params.description_variant_count; ++v)
      variants.push_back(make_description(key));
    return variants;
  };

  auto interior_id = [](int i) { return "s" + std::to_string(i); };
  auto ending_id = [](int i) { return "end" + std::to_string(i); };

  std::size_t key = 0;
  for (int i = 0; i < n_interior; ++i) {
    StateSpec state;
    state.id = interior_id(i);
    state.description_variants = make_variants(key++);
    game.states.emplace(state.id, std::move(state));
  }
  // one maximal-reward ending, the rest graded down to -r_max/2
  for (int i = 0; i < params.n_endings; ++i) {
    StateSpec state;
    state.id = ending_id(i);
    state.description_variants = make_variants(key++);
    state.terminal = true;
    if (i == 0)
      state.ending_reward = r_max;
    else
      state.ending_reward = r_max - static_cast<double>(i) * (1.5 * r_max) / params.n_endings;
    game.states.emplace(state.id, std::move(state));
  }
  game.start_state = interior_id(0);

  // backbone guaranteeing the r_max ending is reachable within max_steps
  for (int i = 0; i < n_interior; ++i) {
    ActionSpec action;
    action.description_variants = make_variants(key++);
    std::string target = (i + 1 < n_interior) ? interior_id(i + 1) : ending_id(0);
    action.transitions.push_back({target, 1.0});
    game.states.at(interior_id(i)).actions.push_back(std::move(action));
  }

  // distribute extra actions up to the requested average branching
  int total_actions = static_cast<int>(std::lround(params.branching * n_interior));
  int extras = std::max(0, total_actions - n_interior);
  bool made_stochastic = false;
  for (int x = 0; x < extras; ++x) {
    int owner = static_cast<int>(rand_index(rng, n_interior));
    ActionSpec action;
    action.description_variants = make_variants(key++);

    auto pick_target = [&]() -> std::string {
      double u = static_cast<double>(rng()) / static_cast<double>(std::mt19937_64::max());
      if (u < params.cycle_probability || params.n_endings == 0)
        return interior_id(static_cast<int>(rand_index(rng, n_interior)));
      // graded endings only (never the planted optimum, keeping it unique)
      if (params.n_endings > 1 && rand_index(rng, 2) == 0)
        return ending_id(1 + static_cast<int>(rand_index(rng, params.n_endings - 1)));
      return interior_id(static_cast<int>(rand_index(rng, n_interior)));
    };

    std::string first = pick_target();
    if (params.stochastic_transitions && (!made_stochastic || rand_index(rng, 2) == 0)) {
      std::string second = pick_target();
      if (second == first) second = ending_id(params.n_endings - 1);
      // p in {2/8 .. 6/8}, exact in binary
      double p = static_cast<double>(2 + rand_index(rng, 5)) / 8.0;
      action.transitions.push_back({first, p});
      action.transitions.push_back({second, 1.0 - p});
      made_stochastic = true;
    } else {
      action.transitions.push_back({first, 1.0});
    }
    game.states.at(interior_id(owner)).actions.push_back(std::move(action));
  }

  std::vector<std::string> violations;
  validate(game, violations);
  if (!violations.empty()) throw ValidationError(violations);
  return game;
}

std::vector<std::string> enumerate_vocabulary(const std::vector<GameSpec>& games) {
  std::set<std::string> tokens;
  for (const auto& game : games) {
    for (const auto& [id, state] : game.states) {
      for (const auto& text : state.description_variants)
        for (auto& t : preprocess(text)) tokens.insert(std::move(t));
      for (const auto& action : state.actions)
        for (const auto& text : action.description_variants)
          for (auto& t : preprocess(text)) tokens.insert(std::move(t));
    }
  }
  return {tokens.begin(), tokens.end()};
}

Vocabulary build_vocabulary(const std::vector<GameSpec>& games) {
  return Vocabulary::build(enumerate_vocabulary(games));
}

}  // namespace ssaqn
