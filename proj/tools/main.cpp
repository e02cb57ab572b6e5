#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ssaqn/agent.hpp"
#include "ssaqn/engine.hpp"
#include "ssaqn/gamefmt.hpp"
#include "ssaqn/nn.hpp"
#include "ssaqn/trainer.hpp"

namespace {

using namespace ssaqn;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;

struct IoFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoFailure("failed to write: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<GameSpec> load_games(const std::vector<std::string>& paths) {
  std::vector<GameSpec> games;
  for (const auto& path : paths) games.push_back(load_game_file(path));
  return games;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

int run_play(const std::string& path, std::uint64_t seed) {
  GameSpec game = load_game_file(path);
  Simulator sim(game, seed);
  Observation obs = sim.reset();
  while (true) {
    std::cout << "\n" << obs.state_text << "\n";
    if (obs.done) break;
    for (std::size_t i = 0; i < obs.action_texts.size(); ++i)
      std::cout << "  " << (i + 1) << ") " << obs.action_texts[i] << "\n";
    std::cout << "> " << std::flush;
    std::string line;
    if (!std::getline(std::cin, line)) return kExitOk;
    if (line == "q" || line == "quit") return kExitOk;
    int choice = 0;
    try {
      choice = std::stoi(line);
    } catch (...) {
      std::cout << "Please enter an action number or q to quit.\n";
      continue;
    }
    if (choice < 1 || choice > static_cast<int>(obs.action_texts.size())) {
      std::cout << "Please enter a number between 1 and " << obs.action_texts.size() << ".\n";
      continue;
    }
    obs = sim.step(choice - 1);
  }
  std::cout << "\nTotal reward: " << format_double(sim.episode_reward()) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Choice-based text game MDPs with a siamese Q-network agent"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a seeded synthetic game");
  SyntheticParams gen_params;
  std::string gen_out;
  gen->add_option("--states", gen_params.n_states, "Number of states");
  gen->add_option("--branching", gen_params.branching, "Average actions per state");
  gen->add_option("--endings", gen_params.n_endings, "Number of terminal states");
  gen->add_option("--lexicon", gen_params.lexicon_size, "Lexicon size");
  gen->add_option("--cycle-prob", gen_params.cycle_probability, "Probability of cycle edges");
  gen->add_flag("--stochastic", gen_params.stochastic_transitions, "Allow stochastic transitions");
  gen->add_option("--variants", gen_params.description_variant_count, "Description variants per state");
  gen->add_option("--words", gen_params.avg_words_per_description, "Words per description");
  gen->add_option("--seed", gen_params.seed, "Generator seed");
  gen->add_option("--lexicon-seed", gen_params.lexicon_seed,
                  "Shared lexicon seed (0 derives it from --seed)");
  gen->add_option("--out", gen_out, "Output game file")->required();

  // oracle
  auto* oracle = app.add_subcommand("oracle", "Print a game's optimal expected reward");
  std::string oracle_game;
  oracle->add_option("--game", oracle_game, "Game file")->required();

  // vocab
  auto* vocab_cmd = app.add_subcommand("vocab", "Build a vocabulary over a set of games");
  std::vector<std::string> vocab_games;
  std::string vocab_out;
  vocab_cmd->add_option("--games", vocab_games, "Game files")->required();
  vocab_cmd->add_option("--out", vocab_out, "Output vocabulary file (default stdout)");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train an agent");
  std::vector<std::string> train_paths, eval_paths;
  std::string train_out, metrics_out, initial_path, vocab_path, preset;
  TrainConfig config;
  train_cmd->add_option("--games", train_paths, "Training game files")->required();
  train_cmd->add_option("--eval-games", eval_paths, "Evaluation game files (default: training games)");
  train_cmd->add_option("--episodes", config.episodes, "Number of episodes")->required();
  train_cmd->add_option("--lr", config.learning_rate, "Learning rate")->required();
  train_cmd->add_option("--eps-decay", config.epsilon_decay, "Exploration decay per episode");
  train_cmd->add_option("--gamma", config.gamma, "Discount factor");
  train_cmd->add_option("--batch", config.batch_size, "Batch size");
  train_cmd->add_option("--prioritized", config.prioritized_fraction, "Positive-reward batch fraction");
  train_cmd->add_option("--eval-every", config.eval_every, "Evaluate every N episodes");
  train_cmd->add_option("--eval-runs", config.eval_runs, "Episodes per evaluation point");
  train_cmd->add_option("--seed", config.seed, "Run seed");
  train_cmd->add_option("--out", train_out, "Output checkpoint file");
  train_cmd->add_option("--metrics", metrics_out, "Output metrics CSV");
  train_cmd->add_option("--initial", initial_path, "Initial checkpoint (transfer)");
  train_cmd->add_option("--history-coeff", config.history_coefficient,
                        "History penalty coefficient (default 2*r_max per game)");
  train_cmd->add_option("--vocab", vocab_path,
                        "Vocabulary file (default: union over all given games)");
  train_cmd->add_option("--preset", preset,
                        "Experiment wiring: individual|generalise|transfer|universal")
      ->check(CLI::IsMember({"individual", "generalise", "transfer", "universal"}));

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::vector<std::string> eval_only_paths;
  std::string eval_ckpt;
  int eval_runs = 1;
  std::uint64_t eval_seed = 0;
  double eval_history = -1.0;
  eval_cmd->add_option("--games", eval_only_paths, "Game files")->required();
  eval_cmd->add_option("--initial", eval_ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--eval-runs", eval_runs, "Episodes per game");
  eval_cmd->add_option("--seed", eval_seed, "Evaluation seed");
  eval_cmd->add_option("--history-coeff", eval_history,
                       "History penalty coefficient (default 2*r_max per game)");

  // play
  auto* play_cmd = app.add_subcommand("play", "Play a game interactively");
  std::string play_game;
  std::uint64_t play_seed = 0;
  play_cmd->add_option("--game", play_game, "Game file")->required();
  play_cmd->add_option("--seed", play_seed, "Episode seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) {
      GameSpec game = generate_synthetic(gen_params);
      write_file(gen_out, save_game(game));
      return kExitOk;
    }

    if (*oracle) {
      GameSpec game = load_game_file(oracle_game);
      std::cout << format_double(optimal_reward(game).optimal_expected_reward) << "\n";
      return kExitOk;
    }

    if (*vocab_cmd) {
      Vocabulary vocab = build_vocabulary(load_games(vocab_games));
      if (vocab_out.empty())
        std::cout << vocab.serialize();
      else
        write_file(vocab_out, vocab.serialize());
      return kExitOk;
    }

    if (*train_cmd) {
      std::vector<GameSpec> games = load_games(train_paths);
      std::vector<GameSpec> eval_games =
          eval_paths.empty() ? games : load_games(eval_paths);

      std::vector<GameSpec> train_games = games;
      if (preset == "generalise") {
        if (eval_paths.empty()) {
          std::cerr << "error: --preset generalise needs --eval-games (the held-out games)\n";
          return kExitUsage;
        }
        std::set<std::string> held_out;
        for (const auto& g : eval_games) held_out.insert(g.id);
        train_games.clear();
        for (const auto& g : games)
          if (!held_out.count(g.id)) train_games.push_back(g);
        if (train_games.empty()) {
          std::cerr << "error: holding out every game leaves nothing to train on\n";
          return kExitUsage;
        }
      } else if (preset == "transfer") {
        if (initial_path.empty()) {
          std::cerr << "error: --preset transfer needs --initial\n";
          return kExitUsage;
        }
      }
      // individual and universal both train and evaluate on the given games

      Vocabulary vocab;
      if (!vocab_path.empty()) {
        vocab = Vocabulary::deserialize(read_file(vocab_path));
      } else {
        std::vector<GameSpec> all = games;
        for (const auto& g : eval_games) all.push_back(g);
        vocab = build_vocabulary(all);
      }

      std::optional<Checkpoint> initial;
      if (!initial_path.empty()) initial = load_checkpoint(initial_path);

      TrainResult result = train(train_games, eval_games, config, vocab, initial);

      if (!metrics_out.empty()) write_file(metrics_out, metrics_to_csv(result.metrics));
      if (!train_out.empty())
        save_checkpoint(result.agent.params(), result.agent.vocab(), train_out);
      if (!result.metrics.empty()) {
        const MetricsRow& last = result.metrics.back();
        std::cerr << "final eval: " << last.game_id << " " << format_double(last.eval_mean)
                  << " +- " << format_double(last.eval_std) << "\n";
      }
      return kExitOk;
    }

    if (*eval_cmd) {
      Checkpoint ckpt = load_checkpoint(eval_ckpt);
      Agent agent(std::move(ckpt.params), std::move(ckpt.vocab), 0.0);
      for (const auto& path : eval_only_paths) {
        GameSpec game = load_game_file(path);
        agent.set_history_coefficient(eval_history >= 0.0 ? eval_history : 2.0 * game.r_max);
        auto [mean, stddev] = agent.evaluate(game, eval_runs, eval_seed);
        std::cout << game.id << "," << format_double(mean) << "," << format_double(stddev) << "\n";
      }
      return kExitOk;
    }

    if (*play_cmd) return run_play(play_game, play_seed);
  } catch (const IoFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
