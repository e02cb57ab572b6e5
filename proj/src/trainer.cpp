#include "ssaqn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ssaqn/gamefmt.hpp"

namespace ssaqn {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return splitmix64(seed ^ splitmix64(a ^ splitmix64(b)));
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {}

void ReplayMemory::store(ExperienceTuple exp) {
  if (buffer_.size() == capacity_) {
    buffer_.pop_front();
    std::uint64_t oldest = next_seq_ - capacity_;
    if (!positives_.empty() && positives_.front() == oldest) positives_.pop_front();
  }
  if (exp.reward > 0.0) positives_.push_back(next_seq_);
  buffer_.push_back(std::move(exp));
  ++next_seq_;
}

std::vector<ExperienceTuple> ReplayMemory::sample_batch(std::size_t b, double p,
                                                        std::mt19937_64& rng) const {
  if (buffer_.empty()) throw EmptyMemory();
  std::size_t n_positive = positives_.empty() ? 0 : static_cast<std::size_t>(p * b);
  std::vector<ExperienceTuple> batch;
  batch.reserve(b);
  std::uint64_t base = next_seq_ - buffer_.size();
  for (std::size_t k = 0; k < n_positive; ++k) {
    std::uint64_t seq = positives_[rng() % positives_.size()];
    batch.push_back(buffer_[seq - base]);
  }
  for (std::size_t k = n_positive; k < b; ++k) batch.push_back(buffer_[rng() % buffer_.size()]);
  return batch;
}

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "episode,game_id,eval_mean,eval_std,epsilon,steps,loss\n";
  for (const auto& r : rows) {
    out += std::to_string(r.episode) + "," + r.game_id + "," + format_double(r.eval_mean) + "," +
           format_double(r.eval_std) + "," + format_double(r.epsilon) + "," +
           std::to_string(r.steps) + "," + format_double(r.loss) + "\n";
  }
  return out;
}

double compute_target(const ExperienceTuple& exp, const Agent& agent, double gamma) {
  if (exp.terminal()) return exp.reward;
  return exp.reward + gamma * agent.max_q(exp.next_state_text, exp.next_action_texts, exp.r_max);
}

EpisodeResult run_episode(const Agent& agent, Simulator& sim, double eps, HistoryLedger& ledger,
                          std::mt19937_64& rng) {
  const GameSpec& game = sim.game();
  EpisodeResult result;
  ledger.clear();
  Observation obs = sim.reset();
  while (!obs.done) {
    int a = agent.select_action(obs, game.r_max, eps, ledger, rng);
    ExperienceTuple exp;
    exp.state_text = obs.state_text;
    exp.action_text = obs.action_texts[a];
    exp.game_id = game.id;
    exp.r_max = game.r_max;
    obs = sim.step(a);
    exp.reward = obs.last_reward;
    exp.next_state_text = obs.state_text;
    if (!obs.done) exp.next_action_texts = obs.action_texts;
    result.experiences.push_back(std::move(exp));
  }
  result.reward = sim.episode_reward();
  result.steps = sim.steps_taken();
  return result;
}

TrainResult train(const std::vector<GameSpec>& train_games, const std::vector<GameSpec>& eval_games,
                  const TrainConfig& config, const Vocabulary& vocab,
                  const std::optional<Checkpoint>& initial) {
  NetworkConfig net_config;
  net_config.vocab_size = vocab.size();

  Parameters params;
  if (initial) {
    if (!(initial->vocab == vocab))
      throw VocabMismatch("checkpoint vocabulary differs from the supplied one");
    params = initial->params;
  } else {
    params = init_params(net_config, config.seed);
  }

  Agent agent(std::move(params), vocab, 0.0);
  OptimizerState opt(agent.config());
  ReplayMemory memory(config.replay_capacity);

  auto history_coeff = [&](const GameSpec& game) {
    return config.history_coefficient >= 0.0 ? config.history_coefficient : 2.0 * game.r_max;
  };

  std::vector<MetricsRow> metrics;
  double eps = config.epsilon;
  double last_loss = 0.0;

  for (int e = 0; e < config.episodes; ++e) {
    std::map<std::string, int> rollout_steps;
    for (std::size_t g = 0; g < train_games.size(); ++g) {
      const GameSpec& game = train_games[g];
      agent.set_history_coefficient(history_coeff(game));
      Simulator sim(game, mix(config.seed, e, g));
      HistoryLedger ledger;
      std::mt19937_64 rng(mix(config.seed, e, 0x1000 + g));
      EpisodeResult episode = run_episode(agent, sim, eps, ledger, rng);
      rollout_steps[game.id] = episode.steps;
      for (auto& exp : episode.experiences) memory.store(std::move(exp));
    }

    if (memory.size() > 0) {
      std::mt19937_64 batch_rng(mix(config.seed, e, 0x2000));
      std::vector<ExperienceTuple> batch =
          memory.sample_batch(config.batch_size, config.prioritized_fraction, batch_rng);

      // targets are constants: computed before the update, no gradient flows
      std::vector<double> targets(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        double t = compute_target(batch[i], agent, config.gamma);
        targets[i] = normalize_target(t, batch[i].r_max);
      }

      std::vector<std::vector<int>> state_seqs, action_seqs;
      state_seqs.reserve(batch.size());
      action_seqs.reserve(batch.size());
      for (const auto& exp : batch) {
        state_seqs.push_back(agent.encode_text(exp.state_text));
        action_seqs.push_back(agent.encode_text(exp.action_text));
      }
      PaddedBatch states = pad_batch(state_seqs);
      PaddedBatch actions = pad_batch(action_seqs);

      Parameters grads(agent.config());
      double loss = 0.0;
      const double inv_b = 1.0 / static_cast<double>(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        auto [cs, cache] = ssaqn_forward(agent.params(), states.rows[i], actions.rows[i]);
        double diff = targets[i] - cs;
        loss += diff * diff * inv_b;
        ssaqn_backward(agent.params(), cache, -2.0 * diff * inv_b, grads);
      }
      last_loss = loss;

      rmsprop_step(agent.mutable_params(), opt, grads, config.learning_rate);
      agent.invalidate_cache();
    }

    eps *= config.epsilon_decay;

    if ((e + 1) % config.eval_every == 0) {
      for (std::size_t g = 0; g < eval_games.size(); ++g) {
        const GameSpec& game = eval_games[g];
        agent.set_history_coefficient(history_coeff(game));
        auto [mean, stddev] = agent.evaluate(game, config.eval_runs, mix(config.seed, e, 0x3000 + g));
        MetricsRow row;
        row.episode = e + 1;  // 1-based: row written after the episode completes
        row.game_id = game.id;
        row.eval_mean = mean;
        row.eval_std = stddev;
        row.epsilon = eps;
        auto it = rollout_steps.find(game.id);
        row.steps = it != rollout_steps.end()
                        ? it->second
                        : agent.greedy_episode_steps(game, mix(config.seed, e, 0x4000 + g));
        row.loss = last_loss;
        metrics.push_back(std::move(row));
      }
    }
  }

  return {std::move(agent), std::move(metrics)};
}

}  // namespace ssaqn
