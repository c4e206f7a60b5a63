#include "neverup/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <thread>
#include <utility>

#include "neverup/checkpoint.hpp"
#include "neverup/env/disco_maze.hpp"
#include "neverup/env/gridworld.hpp"
#include "neverup/env/tabular.hpp"
#include "neverup/errors.hpp"

namespace neverup {
namespace {

std::unique_ptr<Env> make_env(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.environment == "disco_maze") {
    DiscoMazeConfig mc{.size = cfg.maze_size,
                       .colors = cfg.palette_colors,
                       .time_limit = cfg.time_limit,
                       .randomize_colors = cfg.randomize_colors};
    return std::make_unique<DiscoMaze>(mc, seed);
  }
  if (cfg.environment == "gridworld") {
    GridworldConfig gc{.size = cfg.maze_size,
                       .colors = cfg.palette_colors,
                       .time_limit = cfg.time_limit,
                       .randomize_colors = cfg.randomize_colors};
    return std::make_unique<Gridworld>(gc, seed);
  }
  if (cfg.environment == "chain")
    return std::make_unique<TabularEnv>(make_chain_mdp(cfg.chain_states, cfg.gamma_max), 0,
                                        cfg.time_limit, seed);
  throw ConfigError("unknown environment " + cfg.environment);
}

struct Models {
  QNetwork q;
  EmbeddingModel embedding;
  RndModel rnd;
};

Models make_models(const ExperimentConfig& cfg, const Env& env, Rng& rng) {
  const QNetConfig qc{.torso_hidden = cfg.torso_hidden,
                      .gru_hidden = cfg.gru_hidden,
                      .head_hidden = cfg.head_hidden};
  const EmbeddingConfig ec{.embedding_dim = cfg.embedding_dim,
                           .f_hidden = cfg.f_hidden,
                           .h_hidden = cfg.h_hidden,
                           .l2_weight = static_cast<float>(cfg.l2_weight),
                           .random_projection = cfg.embedding_mode == "random_projection"};
  const RndConfig rc{.output_dim = cfg.rnd_dim, .hidden = cfg.rnd_hidden};
  return Models{
      QNetwork(env.obs_cells(), env.obs_channels(), env.action_count(), cfg.num_mixtures, qc, rng),
      EmbeddingModel(env.obs_cells(), env.obs_channels(), env.action_count(), ec, rng),
      RndModel(env.obs_cells(), env.obs_channels(), rc, rng)};
}

LearnerConfig make_learner_config(const ExperimentConfig& cfg) {
  LearnerConfig lc;
  lc.batch_size = cfg.batch_size;
  lc.trace_length = cfg.trace_length;
  lc.replay_period = cfg.replay_period;
  lc.target_update_period = cfg.target_update_period;
  lc.aux_frames_per_sequence = cfg.aux_frames_per_sequence;
  lc.priority_max_weight = cfg.priority_max_weight;
  lc.cross_mixture_ratio = cfg.cross_mixture_ratio;
  lc.use_rnd = cfg.use_rnd;
  lc.train_embedding = cfg.embedding_mode == "learned";
  lc.retrace = RetraceConfig{.lambda = cfg.retrace_lambda,
                             .h_epsilon = cfg.h_epsilon,
                             .use_squash = cfg.reward_transform == "squash",
                             .double_q = true,
                             .target_epsilon = cfg.target_epsilon};
  lc.adam_rl = AdamConfig{.learning_rate = static_cast<float>(cfg.lr_rl),
                          .beta1 = static_cast<float>(cfg.adam_beta1),
                          .beta2 = static_cast<float>(cfg.adam_beta2),
                          .epsilon = static_cast<float>(cfg.adam_epsilon),
                          .clip_norm = static_cast<float>(cfg.adam_clip_norm)};
  lc.adam_aux = lc.adam_rl;
  lc.adam_aux.learning_rate = static_cast<float>(cfg.lr_aux);
  return lc;
}

std::map<std::string, Tensor> copy_params(std::vector<NamedParamConst> params) {
  std::map<std::string, Tensor> out;
  for (const auto& p : params) out.emplace(p.name, *p.tensor);
  return out;
}

std::shared_ptr<const ModelSnapshot> snapshot_of(const Learner& learner, std::uint64_t version) {
  auto snap = std::make_shared<ModelSnapshot>();
  snap->version = version;
  snap->q_params = copy_params(learner.online().params());
  snap->embed_params = copy_params(learner.embedding().all_params());
  snap->rnd_params = copy_params(learner.rnd().all_params());
  return snap;
}

ActorParams make_actor_params(const ExperimentConfig& cfg, int id, int mixture, double epsilon,
                              bool evaluator) {
  ActorParams p;
  p.id = id;
  p.mixture = mixture;
  p.epsilon = epsilon;
  p.meta_episode_len = cfg.meta_episode_len;
  p.trace_length = cfg.trace_length;
  p.replay_period = cfg.replay_period;
  p.snapshot_refresh_period = cfg.actor_update_period;
  p.episodic_capacity = cfg.episodic_capacity;
  p.kernel = KernelConfig{.epsilon = cfg.kernel_epsilon,
                          .k = cfg.kernel_neighbors,
                          .c = cfg.kernel_c,
                          .xi = cfg.kernel_xi,
                          .sm = cfg.kernel_sm,
                          .zero_when_empty = cfg.first_step_zero_reward};
  p.combiner = CombinerConfig{.clip_ceiling = cfg.rnd_clip,
                              .use_rnd = cfg.use_rnd,
                              .cross_mixture_ratio = cfg.cross_mixture_ratio};
  p.evaluator = evaluator;
  return p;
}

double actor_epsilon(const ExperimentConfig& cfg, int j) {
  // geometric spread over [base^power, base]
  const double denom = cfg.actor_count > 1 ? static_cast<double>(cfg.actor_count - 1) : 1.0;
  const double frac = cfg.actor_count > 1 ? static_cast<double>(j) / denom : 0.5;
  return std::pow(cfg.actor_epsilon_base, 1.0 + frac * (cfg.actor_epsilon_power - 1.0));
}

void save_models(const std::string& path, const Learner& learner) {
  std::vector<NamedParamConst> all;
  for (const auto& p : learner.online().params()) all.push_back(p);
  for (const auto& p : learner.embedding().all_params()) all.push_back(p);
  for (const auto& p : learner.rnd().all_params()) all.push_back(p);
  save_checkpoint(path, all);
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                                 std::uint64_t seed) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);

  Rng master(seed);
  Rng model_rng = master.split(1);
  Rng learner_rng = master.split(2);

  const MixtureSchedule schedule =
      make_schedule(cfg.num_mixtures, cfg.beta, cfg.gamma_max, cfg.gamma_min);
  schedule.dump_csv(out_dir + "/schedule.csv");
  {
    std::ofstream os(out_dir + "/config.resolved");
    os << dump_config(cfg);
  }

  const std::unique_ptr<Env> proto_env = make_env(cfg, 0);
  Models m = make_models(cfg, *proto_env, model_rng);
  Rng target_rng = master.split(3);
  QNetwork target(proto_env->obs_cells(), proto_env->obs_channels(), proto_env->action_count(),
                  cfg.num_mixtures, m.q.config(), target_rng);
  Learner learner(std::move(m.q), std::move(target), std::move(m.embedding), std::move(m.rnd),
                  schedule, make_learner_config(cfg));

  ReplayBuffer buffer(static_cast<int>(cfg.replay_capacity), cfg.priority_exponent,
                      cfg.min_replay_sequences);
  SnapshotMailbox mailbox;
  std::uint64_t snapshot_version = 1;
  mailbox.publish(snapshot_of(learner, snapshot_version));

  MetricsSink metrics(out_dir + "/metrics.csv");

  // actors
  std::vector<std::unique_ptr<Actor>> actors;
  for (int j = 0; j < cfg.actor_count; ++j) {
    const int mixture = actor_mixture(j, cfg.num_mixtures, cfg.paper_actor_assignment);
    Rng actor_model_rng = master.split(100 + static_cast<std::uint64_t>(j));
    Models am = make_models(cfg, *proto_env, actor_model_rng);  // shapes; params replaced
    am.q.copy_params_from(learner.online());
    restore_params(am.embedding.all_params(),
                   copy_params(std::as_const(learner).embedding().all_params()));
    restore_params(am.rnd.all_params(), copy_params(std::as_const(learner).rnd().all_params()));
    actors.push_back(std::make_unique<Actor>(
        make_env(cfg, seed * 7919 + static_cast<std::uint64_t>(j) + 1), std::move(am.q),
        std::move(am.embedding), std::move(am.rnd), schedule.beta(mixture),
        make_actor_params(cfg, j, mixture, actor_epsilon(cfg, j), false),
        seed * 104729 + static_cast<std::uint64_t>(j)));
  }

  // evaluator
  Rng eval_model_rng = master.split(999);
  Models em = make_models(cfg, *proto_env, eval_model_rng);
  em.q.copy_params_from(learner.online());
  restore_params(em.embedding.all_params(),
                 copy_params(std::as_const(learner).embedding().all_params()));
  restore_params(em.rnd.all_params(), copy_params(std::as_const(learner).rnd().all_params()));
  Actor evaluator(make_env(cfg, seed * 15485863 + 77), std::move(em.q), std::move(em.embedding),
                  std::move(em.rnd), schedule.beta(cfg.eval_mixture),
                  make_actor_params(cfg, -1, cfg.eval_mixture, cfg.eval_epsilon, true),
                  seed * 32452843 + 13);

  ExperimentSummary summary;
  summary.metrics_path = out_dir + "/metrics.csv";
  summary.checkpoint_path = out_dir + "/checkpoint_final.ngu";
  std::atomic<std::int64_t> frames{0};

  auto checkpoint_if_due = [&](std::int64_t frame_count, std::int64_t& last) {
    if (cfg.checkpoint_period_frames <= 0) return;
    if (frame_count - last < cfg.checkpoint_period_frames) return;
    last = frame_count;
    save_models(out_dir + "/checkpoint_" + std::to_string(frame_count) + ".ngu", learner);
  };

  if (cfg.driver == "serial") {
    const std::int64_t chunk = 40;  // actor frames per turn
    std::int64_t learner_due = 0;
    std::int64_t next_eval = 0;
    std::int64_t last_ckpt = 0;
    while (frames.load() < cfg.frame_budget) {
      for (auto& actor : actors) {
        if (frames.load() >= cfg.frame_budget) break;
        const std::int64_t n = std::min<std::int64_t>(chunk, cfg.frame_budget - frames.load());
        actor->run_steps(n, &buffer, &mailbox, &metrics, &frames);
      }
      learner_due += static_cast<std::int64_t>(actors.size()) * chunk;
      while (learner_due >= cfg.frames_per_learner_step) {
        learner_due -= cfg.frames_per_learner_step;
        const LearnerStats st = learner.step(buffer, learner_rng);
        if (st.stepped) {
          mailbox.publish(snapshot_of(learner, ++snapshot_version));
          if (st.steps % 50 == 0) {
            metrics.record({0.0, frames.load(), "learner/rl_loss", -1, st.rl_loss});
            metrics.record({0.0, frames.load(), "learner/embed_loss", -1, st.embed_loss});
            metrics.record({0.0, frames.load(), "learner/rnd_loss", -1, st.rnd_loss});
          }
        }
      }
      if (frames.load() >= next_eval) {
        next_eval += cfg.eval_period_frames;
        auto records = evaluator.run_episodes(cfg.eval_episodes, &mailbox, &metrics, frames.load());
        summary.eval_records.insert(summary.eval_records.end(), records.begin(), records.end());
      }
      checkpoint_if_due(frames.load(), last_ckpt);
    }
  } else {
    // threaded: actors, learner, and evaluator communicate only through the
    // replay buffer and the snapshot mailbox; metrics go through the sink's
    // serialized queue.
    std::vector<std::thread> workers;
    for (auto& actor : actors)
      workers.emplace_back([&, a = actor.get()] {
        while (frames.load(std::memory_order_relaxed) < cfg.frame_budget)
          a->run_steps(40, &buffer, &mailbox, &metrics, &frames);
      });
    std::thread learner_thread([&] {
      while (frames.load(std::memory_order_relaxed) < cfg.frame_budget) {
        const std::int64_t budgeted =
            frames.load(std::memory_order_relaxed) / cfg.frames_per_learner_step;
        if (learner.steps_taken() < budgeted && buffer.ready()) {
          const LearnerStats st = learner.step(buffer, learner_rng);
          if (st.stepped) mailbox.publish(snapshot_of(learner, ++snapshot_version));
        } else {
          std::this_thread::sleep_for(std::chrono::milliseconds(1));
        }
      }
    });
    std::thread eval_thread([&] {
      std::int64_t next_eval = 0;
      while (frames.load(std::memory_order_relaxed) < cfg.frame_budget) {
        if (frames.load(std::memory_order_relaxed) >= next_eval) {
          next_eval += cfg.eval_period_frames;
          auto records =
              evaluator.run_episodes(cfg.eval_episodes, &mailbox, &metrics, frames.load());
          summary.eval_records.insert(summary.eval_records.end(), records.begin(), records.end());
        } else {
          std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
      }
    });
    for (auto& w : workers) w.join();
    learner_thread.join();
    eval_thread.join();
  }

  // final evaluation + checkpoint
  if (cfg.frame_budget > 0) {
    auto records = evaluator.run_episodes(cfg.eval_episodes, &mailbox, &metrics, frames.load());
    summary.eval_records.insert(summary.eval_records.end(), records.begin(), records.end());
  }
  save_models(summary.checkpoint_path, learner);

  summary.frames = frames.load();
  summary.learner_steps = learner.steps_taken();
  for (const auto& actor : actors) summary.episodes += actor->episodes_completed();
  metrics.close();
  return summary;
}

std::vector<EpisodeRecord> evaluate_checkpoint(const ExperimentConfig& cfg,
                                               const std::string& checkpoint_path,
                                               int beta_index, int episodes, std::uint64_t seed) {
  cfg.validate();
  if (beta_index < 0 || beta_index >= cfg.num_mixtures)
    throw ConfigError("evaluate: beta index out of range");
  const auto loaded = load_checkpoint(checkpoint_path);
  Rng rng(seed);
  const std::unique_ptr<Env> proto_env = make_env(cfg, 0);
  Models m = make_models(cfg, *proto_env, rng);
  restore_params(m.q.params(), loaded);
  restore_params(m.embedding.all_params(), loaded);
  restore_params(m.rnd.all_params(), loaded);
  const MixtureSchedule schedule =
      make_schedule(cfg.num_mixtures, cfg.beta, cfg.gamma_max, cfg.gamma_min);
  Actor evaluator(make_env(cfg, seed + 1), std::move(m.q), std::move(m.embedding),
                  std::move(m.rnd), schedule.beta(beta_index),
                  make_actor_params(cfg, -1, beta_index, cfg.eval_epsilon, true), seed + 2);
  return evaluator.run_episodes(episodes, nullptr, nullptr, 0);
}

}  // namespace neverup
