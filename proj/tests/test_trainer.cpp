#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "ssaqn/gamefmt.hpp"
#include "ssaqn/trainer.hpp"

using namespace ssaqn;
using namespace ssaqn::testing;

namespace {

ExperienceTuple make_exp(double reward, bool terminal = false) {
  ExperienceTuple exp;
  exp.state_text = "a room";
  exp.action_text = "go on";
  exp.reward = reward;
  exp.next_state_text = "another room";
  if (!terminal) exp.next_action_texts = {"go on", "go back"};
  exp.game_id = "g";
  exp.r_max = 20.0;
  return exp;
}

}  // namespace

TEST_CASE("replay memory stores, evicts FIFO, and tracks positives") {
  ReplayMemory mem(3);
  mem.store(make_exp(-0.1));
  mem.store(make_exp(5.0));
  mem.store(make_exp(-0.1));
  CHECK(mem.size() == 3);
  CHECK(mem.positive_count() == 1);

  mem.store(make_exp(7.0));  // evicts the first negative tuple
  CHECK(mem.size() == 3);
  CHECK(mem.positive_count() == 2);
  CHECK(mem.at(0).reward == doctest::Approx(5.0));

  mem.store(make_exp(-0.1));
  mem.store(make_exp(-0.1));  // now the 5.0 tuple is gone too
  CHECK(mem.positive_count() == 1);
  CHECK(mem.at(0).reward == doctest::Approx(7.0));
}

TEST_CASE("sample_batch draws exactly floor(p*b) positives") {
  ReplayMemory mem(100);
  for (int i = 0; i < 40; ++i) mem.store(make_exp(-0.1));
  for (int i = 0; i < 10; ++i) mem.store(make_exp(1.0 + i));

  std::mt19937_64 rng(9);
  for (int round = 0; round < 20; ++round) {
    auto batch = mem.sample_batch(10, 0.25, rng);
    CHECK(batch.size() == 10);
    int positives = 0;
    for (const auto& e : batch)
      if (e.reward > 0.0) ++positives;
    CHECK(positives >= 2);  // floor(0.25*10) guaranteed slots, rest may add more
  }
}

TEST_CASE("sample_batch with p zero needs no positives") {
  ReplayMemory mem(10);
  for (int i = 0; i < 5; ++i) mem.store(make_exp(-0.1));
  std::mt19937_64 rng(1);
  CHECK(mem.sample_batch(8, 0.0, rng).size() == 8);
  CHECK(mem.sample_batch(8, 0.25, rng).size() == 8);  // empty positive index: plain uniform
}

TEST_CASE("a single stored tuple fills any batch by replacement") {
  ReplayMemory mem(10);
  mem.store(make_exp(3.0));
  std::mt19937_64 rng(2);
  auto batch = mem.sample_batch(4, 0.25, rng);
  CHECK(batch.size() == 4);
  for (const auto& e : batch) CHECK(e.reward == doctest::Approx(3.0));
}

TEST_CASE("sample_batch on an empty memory throws") {
  ReplayMemory mem(10);
  std::mt19937_64 rng(3);
  CHECK_THROWS_AS(mem.sample_batch(4, 0.25, rng), EmptyMemory);
}

TEST_CASE("compute_target handles terminal and non-terminal tuples") {
  GameSpec game = load_game_file(asset_path("games/mini-quest.game"));
  Vocabulary vocab = build_vocabulary({game});
  NetworkConfig cfg;
  cfg.vocab_size = vocab.size();
  Agent agent(init_params(cfg, 55), vocab, 0.0);

  ExperienceTuple terminal = make_exp(20.0, true);
  CHECK(compute_target(terminal, agent, 0.95) == doctest::Approx(20.0));

  ExperienceTuple live = make_exp(-0.1);
  CHECK(compute_target(live, agent, 0.0) == doctest::Approx(-0.1));

  double max_q = agent.max_q(live.next_state_text, live.next_action_texts, live.r_max);
  CHECK(compute_target(live, agent, 0.95) ==
        doctest::Approx(live.reward + 0.95 * max_q).epsilon(1e-12));
  // the worked example: r = -0.1, gamma = 0.95, max Q = 10
  CHECK(-0.1 + 0.95 * 10.0 == doctest::Approx(9.4));
}

TEST_CASE("run_episode emits one tuple per step with a terminal tail") {
  GameSpec game = load_game_file(asset_path("games/mini-quest.game"));
  Vocabulary vocab = build_vocabulary({game});
  NetworkConfig cfg;
  cfg.vocab_size = vocab.size();
  Agent agent(init_params(cfg, 13), vocab, 2.0 * game.r_max);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Simulator sim(game, seed);
    HistoryLedger ledger;
    std::mt19937_64 rng(seed + 70);
    EpisodeResult result = run_episode(agent, sim, 1.0, ledger, rng);
    CHECK(result.steps == static_cast<int>(result.experiences.size()));
    CHECK(result.steps >= 1);
    CHECK(result.steps <= game.max_steps);
    double total = 0.0;
    for (std::size_t i = 0; i < result.experiences.size(); ++i) {
      const auto& e = result.experiences[i];
      total += e.reward;
      CHECK(e.game_id == game.id);
      CHECK(e.r_max == doctest::Approx(game.r_max));
      CHECK(e.terminal() == (i + 1 == result.experiences.size()));
    }
    CHECK(total == doctest::Approx(result.reward).epsilon(1e-12));
  }
}

TEST_CASE("run_episode on loop-trap always terminates") {
  GameSpec game = load_game_file(asset_path("games/loop-trap.game"));
  Vocabulary vocab = build_vocabulary({game});
  NetworkConfig cfg;
  cfg.vocab_size = vocab.size();
  Agent agent(init_params(cfg, 21), vocab, 2.0 * game.r_max);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Simulator sim(game, seed);
    HistoryLedger ledger;
    std::mt19937_64 rng(seed);
    EpisodeResult result = run_episode(agent, sim, 0.0, ledger, rng);
    CHECK(result.steps <= game.max_steps);
  }
}

TEST_CASE("a single training episode updates the parameters and decays epsilon") {
  GameSpec game = load_game_file(asset_path("games/mini-quest.game"));
  Vocabulary vocab = build_vocabulary({game});
  TrainConfig config;
  config.episodes = 1;
  config.batch_size = 8;
  config.learning_rate = 1e-3;
  config.seed = 5;

  NetworkConfig cfg;
  cfg.vocab_size = vocab.size();
  Parameters before = init_params(cfg, config.seed);

  TrainResult result = train({game}, {game}, config, vocab);
  REQUIRE(result.metrics.size() == 1);
  CHECK(result.metrics[0].episode == 1);
  CHECK(result.metrics[0].game_id == game.id);
  CHECK(result.metrics[0].epsilon == doctest::Approx(0.99));
  CHECK(result.metrics[0].steps >= 1);

  bool changed = false;
  std::vector<const Mat*> now, init;
  result.agent.params().for_each([&](const char*, const Mat& m) { now.push_back(&m); });
  before.for_each([&](const char*, const Mat& m) { init.push_back(&m); });
  for (std::size_t t = 0; t < now.size(); ++t)
    for (std::size_t i = 0; i < now[t]->data.size(); ++i)
      if (now[t]->data[i] != init[t]->data[i]) changed = true;
  CHECK(changed);
}

TEST_CASE("metrics_to_csv formats header and floats stably") {
  MetricsRow row;
  row.episode = 3;
  row.game_id = "g";
  row.eval_mean = 19.4;
  row.eval_std = 0.0;
  row.epsilon = 0.970299;
  row.steps = 7;
  row.loss = 0.0123456789;
  std::string csv = metrics_to_csv({row});
  CHECK(csv.find("episode,game_id,eval_mean,eval_std,epsilon,steps,loss\n") == 0);
  CHECK(csv.find("3,g,19.4,0,0.970299,7,0.0123456789\n") != std::string::npos);
  CHECK(metrics_to_csv({row}) == metrics_to_csv({row}));
}

TEST_CASE("training is bit-for-bit reproducible") {
  GameSpec game = load_game_file(asset_path("games/mini-quest.game"));
  Vocabulary vocab = build_vocabulary({game});
  TrainConfig config;
  config.episodes = 5;
  config.batch_size = 16;
  config.eval_every = 2;
  config.seed = 99;

  TrainResult a = train({game}, {game}, config, vocab);
  TrainResult b = train({game}, {game}, config, vocab);

  CHECK(metrics_to_csv(a.metrics) == metrics_to_csv(b.metrics));

  std::vector<const Mat*> ma, mb;
  a.agent.params().for_each([&](const char*, const Mat& m) { ma.push_back(&m); });
  b.agent.params().for_each([&](const char*, const Mat& m) { mb.push_back(&m); });
  for (std::size_t t = 0; t < ma.size(); ++t) CHECK(ma[t]->data == mb[t]->data);
}

TEST_CASE("train rejects a checkpoint with a different vocabulary") {
  GameSpec game = load_game_file(asset_path("games/mini-quest.game"));
  Vocabulary vocab = build_vocabulary({game});
  Vocabulary other = Vocabulary::build({"alien", "tokens"});
  NetworkConfig cfg;
  cfg.vocab_size = other.size();
  Checkpoint ckpt{init_params(cfg, 1), other};
  TrainConfig config;
  config.episodes = 1;
  CHECK_THROWS_AS(train({game}, {game}, config, vocab, ckpt), VocabMismatch);
}
