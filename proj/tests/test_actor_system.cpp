#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "neverup/actor.hpp"
#include "neverup/config.hpp"
#include "neverup/env/tabular.hpp"
#include "neverup/errors.hpp"
#include "neverup/experiment.hpp"

using namespace neverup;

namespace {

// One observation, never terminates before the time limit.
class StillEnv : public Env {
 public:
  explicit StillEnv(int limit) : limit_(limit), obs_(1, 0) {}
  int obs_cells() const override { return 1; }
  int obs_channels() const override { return 2; }
  int action_count() const override { return 2; }
  void reset() override {
    steps_ = 0;
    done_ = false;
  }
  double step(int) override {
    if (done_) throw UsageError("StillEnv: episode over");
    if (++steps_ >= limit_) done_ = true;
    return 0.0;
  }
  bool done() const override { return done_; }
  const std::vector<std::uint8_t>& obs() const override { return obs_; }

 private:
  int limit_;
  int steps_ = 0;
  bool done_ = false;
  std::vector<std::uint8_t> obs_;
};

struct TestModels {
  QNetwork q;
  EmbeddingModel embedding;
  RndModel rnd;
};

TestModels make_models(const Env& env, int mixtures, std::uint64_t seed) {
  Rng rng(seed);
  return TestModels{
      QNetwork(env.obs_cells(), env.obs_channels(), env.action_count(), mixtures,
               QNetConfig{.torso_hidden = 8, .gru_hidden = 6, .head_hidden = 8}, rng),
      EmbeddingModel(env.obs_cells(), env.obs_channels(), env.action_count(),
                     EmbeddingConfig{.embedding_dim = 4, .f_hidden = 8, .h_hidden = 8}, rng),
      RndModel(env.obs_cells(), env.obs_channels(), RndConfig{.output_dim = 4, .hidden = 8}, rng)};
}

ActorParams small_params(int mixture, double beta_unused, int trace = 16, int overlap = 8) {
  (void)beta_unused;
  ActorParams p;
  p.id = 0;
  p.mixture = mixture;
  p.epsilon = 0.3;
  p.trace_length = trace;
  p.replay_period = overlap;
  p.episodic_capacity = 512;
  p.kernel.zero_when_empty = true;
  return p;
}

}  // namespace

TEST_CASE("beta_0 actor: augmented rewards equal extrinsic rewards bit-exactly") {
  auto env = std::make_unique<TabularEnv>(make_chain_mdp(6, 0.99), 0, 40, 5);
  TestModels m = make_models(*env, 2, 7);
  Actor actor(std::move(env), std::move(m.q), std::move(m.embedding), std::move(m.rnd),
              /*beta=*/0.0, small_params(0, 0.0), 11);
  ReplayBuffer buf(256, 0.9, 1);
  actor.run_steps(600, &buf, nullptr, nullptr, nullptr);
  int checked = 0;
  buf.for_each([&](const SequenceSample& s) {
    for (int t = 0; t < s.valid_len; ++t) {
      CHECK(s.r_aug[static_cast<std::size_t>(t)] == s.r_ext[static_cast<std::size_t>(t)]);
      ++checked;
    }
  });
  CHECK(checked > 100);
}

TEST_CASE("revisiting one state forever: intrinsic return follows the pseudo-count sum") {
  const int limit = 150;
  auto env = std::make_unique<StillEnv>(limit);
  TestModels m = make_models(*env, 1, 9);
  ActorParams p = small_params(0, 0.3);
  p.kernel.k = 200;  // neighbor set covers the whole episode
  p.combiner.use_rnd = true;
  Actor actor(std::move(env), std::move(m.q), std::move(m.embedding), std::move(m.rnd), 0.3, p,
              13);
  actor.run_steps(limit, nullptr, nullptr, nullptr, nullptr);
  const EpisodeRecord rec = actor.last_episode();
  CHECK(rec.length == limit);
  double bound = 0.0;
  for (int i = 1; i <= limit; ++i) bound += 1.0 / (std::sqrt(static_cast<double>(i)) + 0.001);
  CHECK(rec.return_int <= bound + 1e-6);
  CHECK(rec.return_int == doctest::Approx(bound).epsilon(1e-4));
  CHECK(bound < 0.5 * limit);  // sublinear in episode length
}

TEST_CASE("two actors with the same seed and snapshot produce identical trajectories") {
  auto run = [](ReplayBuffer& buf) {
    auto env = std::make_unique<TabularEnv>(make_chain_mdp(8, 0.99), 0, 30, 21);
    TestModels m = make_models(*env, 2, 33);
    Actor actor(std::move(env), std::move(m.q), std::move(m.embedding), std::move(m.rnd), 0.3,
                small_params(1, 0.3), 55);
    actor.run_steps(400, &buf, nullptr, nullptr, nullptr);
  };
  ReplayBuffer b1(256, 0.9, 1), b2(256, 0.9, 1);
  run(b1);
  run(b2);
  std::vector<SequenceSample> s1, s2;
  b1.for_each([&](const SequenceSample& s) { s1.push_back(s); });
  b2.for_each([&](const SequenceSample& s) { s2.push_back(s); });
  REQUIRE(s1.size() == s2.size());
  for (std::size_t i = 0; i < s1.size(); ++i) {
    CHECK(s1[i].obs == s2[i].obs);
    CHECK(s1[i].actions == s2[i].actions);
    CHECK(s1[i].r_aug == s2[i].r_aug);
    CHECK(s1[i].r_int == s2[i].r_int);
    CHECK(s1[i].mu == s2[i].mu);
    CHECK(s1[i].initial_state.v == s2[i].initial_state.v);
  }
}

TEST_CASE("sequence accounting: every frame is a trained step in exactly one sequence") {
  auto env = std::make_unique<TabularEnv>(make_chain_mdp(10, 0.99), 0, 37, 3);
  TestModels m = make_models(*env, 2, 17);
  Actor actor(std::move(env), std::move(m.q), std::move(m.embedding), std::move(m.rnd), 0.3,
              small_params(1, 0.3), 19);
  ReplayBuffer buf(4096, 0.9, 1);
  actor.run_steps(2000, &buf, nullptr, nullptr, nullptr);

  std::map<std::int64_t, std::int64_t> trained_per_episode;
  std::map<std::int64_t, std::int64_t> expected;
  buf.for_each([&](const SequenceSample& s) {
    trained_per_episode[s.episode_id] += s.valid_len - s.overlap;
    // no sequence crosses an episode boundary: done only at the last step
    for (int t = 0; t + 1 < s.valid_len; ++t) CHECK(s.start_step + t >= 0);
    CHECK(s.valid_len > s.overlap);
  });
  // frames from fully finished episodes must be covered exactly once
  const std::int64_t episodes = actor.episodes_completed();
  std::int64_t covered = 0;
  for (const auto& [ep, n] : trained_per_episode)
    if (ep < episodes) covered += n;
  // total frames in finished episodes: read lengths back from the buffer
  std::map<std::int64_t, std::int64_t> ep_len;
  buf.for_each([&](const SequenceSample& s) {
    ep_len[s.episode_id] = std::max(ep_len[s.episode_id],
                                    static_cast<std::int64_t>(s.start_step + s.valid_len));
  });
  std::int64_t expected_total = 0;
  for (const auto& [ep, n] : ep_len)
    if (ep < episodes) expected_total += n;
  CHECK(covered == expected_total);
}

TEST_CASE("snapshot staleness never exceeds the refresh period") {
  auto env = std::make_unique<TabularEnv>(make_chain_mdp(6, 0.99), 0, 50, 23);
  TestModels m = make_models(*env, 1, 29);
  SnapshotMailbox mailbox;
  auto snap = std::make_shared<ModelSnapshot>();
  snap->version = 5;
  for (auto& p : m.q.params()) snap->q_params.emplace(p.name, *p.tensor);
  mailbox.publish(snap);

  ActorParams p = small_params(0, 0.3);
  p.snapshot_refresh_period = 25;
  Actor actor(std::move(env), std::move(m.q), std::move(m.embedding), std::move(m.rnd), 0.3, p,
              31);
  for (int i = 0; i < 300; ++i) {
    actor.run_steps(1, nullptr, &mailbox, nullptr, nullptr);
    CHECK(actor.steps_since_refresh() <= 25);
  }
  CHECK(actor.snapshot_version() == 5);
}

TEST_CASE("frame budget 0 yields a headers-only metrics CSV without crashing") {
  const auto dir = std::filesystem::temp_directory_path() / "neverup_run0";
  std::filesystem::remove_all(dir);
  ExperimentConfig cfg;
  cfg.environment = "chain";
  cfg.num_mixtures = 2;
  cfg.eval_mixture = 0;
  cfg.frame_budget = 0;
  cfg.actor_count = 2;
  cfg.trace_length = 16;
  cfg.replay_period = 8;
  cfg.torso_hidden = cfg.gru_hidden = cfg.head_hidden = 8;
  cfg.f_hidden = cfg.h_hidden = cfg.rnd_hidden = 8;
  cfg.embedding_dim = 4;
  cfg.rnd_dim = 4;
  cfg.time_limit = 30;
  const ExperimentSummary s = run_experiment(cfg, dir.string(), 1);
  CHECK(s.frames == 0);
  std::ifstream is(s.metrics_path);
  std::string line;
  std::getline(is, line);
  CHECK(line == std::string(MetricsSink::kHeader));
  CHECK_FALSE(std::getline(is, line));
  CHECK(std::filesystem::exists(s.checkpoint_path));
  std::filesystem::remove_all(dir);
}

TEST_CASE("serial chain run: deterministic, produces metrics and checkpoints") {
  auto configure = [] {
    ExperimentConfig cfg;
    cfg.environment = "chain";
    cfg.chain_states = 6;
    cfg.num_mixtures = 2;
    cfg.frame_budget = 3000;
    cfg.actor_count = 2;
    cfg.trace_length = 16;
    cfg.replay_period = 8;
    cfg.batch_size = 8;
    cfg.min_replay_sequences = 8;
    cfg.replay_capacity = 512;
    cfg.frames_per_learner_step = 200;
    cfg.eval_period_frames = 1000;
    cfg.eval_episodes = 1;
    cfg.torso_hidden = cfg.gru_hidden = cfg.head_hidden = 8;
    cfg.f_hidden = cfg.h_hidden = cfg.rnd_hidden = 8;
    cfg.embedding_dim = 4;
    cfg.rnd_dim = 4;
    cfg.time_limit = 30;
    cfg.target_update_period = 5;
    return cfg;
  };
  auto stable_rows = [](const std::string& path) {
    std::ifstream is(path);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(is, line)) {
      const auto comma = line.find(',');
      rows.push_back(comma == std::string::npos ? line : line.substr(comma + 1));
    }
    return rows;
  };
  const auto d1 = std::filesystem::temp_directory_path() / "neverup_runA";
  const auto d2 = std::filesystem::temp_directory_path() / "neverup_runB";
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
  const ExperimentSummary s1 = run_experiment(configure(), d1.string(), 42);
  const ExperimentSummary s2 = run_experiment(configure(), d2.string(), 42);
  CHECK(s1.frames == 3000);
  CHECK(s1.learner_steps > 0);
  CHECK(!s1.eval_records.empty());
  CHECK(std::filesystem::exists(d1 / "schedule.csv"));
  CHECK(std::filesystem::exists(d1 / "config.resolved"));
  CHECK(stable_rows(s1.metrics_path) == stable_rows(s2.metrics_path));

  // the resolved config round-trips through the parser
  std::ifstream is(d1 / "config.resolved");
  std::stringstream buf;
  buf << is.rdbuf();
  const ExperimentConfig round = parse_config_text(buf.str());
  CHECK(round.chain_states == 6);
  CHECK(round.frame_budget == 3000);

  // checkpoint evaluation runs
  const auto records = evaluate_checkpoint(configure(), s1.checkpoint_path, 0, 2, 3);
  CHECK(records.size() == 2);
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
}

TEST_CASE("threaded chain run completes and respects structural invariants") {
  const auto dir = std::filesystem::temp_directory_path() / "neverup_runT";
  std::filesystem::remove_all(dir);
  ExperimentConfig cfg;
  cfg.environment = "chain";
  cfg.chain_states = 6;
  cfg.num_mixtures = 2;
  cfg.frame_budget = 4000;
  cfg.actor_count = 3;
  cfg.driver = "threaded";
  cfg.trace_length = 16;
  cfg.replay_period = 8;
  cfg.batch_size = 8;
  cfg.min_replay_sequences = 8;
  cfg.replay_capacity = 512;
  cfg.frames_per_learner_step = 400;
  cfg.eval_period_frames = 2000;
  cfg.eval_episodes = 1;
  cfg.torso_hidden = cfg.gru_hidden = cfg.head_hidden = 8;
  cfg.f_hidden = cfg.h_hidden = cfg.rnd_hidden = 8;
  cfg.embedding_dim = 4;
  cfg.rnd_dim = 4;
  cfg.time_limit = 30;
  const ExperimentSummary s = run_experiment(cfg, dir.string(), 9);
  CHECK(s.frames >= 4000);
  CHECK(s.episodes > 0);
  const auto rows = read_metrics_csv(s.metrics_path);
  CHECK(!rows.empty());
  std::filesystem::remove_all(dir);
}

TEST_CASE("config parser reports all problems exhaustively") {
  const std::string text =
      "config_version = 1\n"
      "environment = marsrover\n"      // bad value
      "Batch size = -3\n"              // domain violation
      "mystery_knob = 7\n"             // unknown key
      "Trace length = nonsense\n";     // parse failure
  try {
    parse_config_text(text);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("marsrover") != std::string::npos);
    CHECK(msg.find("Batch size") != std::string::npos);
    CHECK(msg.find("mystery_knob") != std::string::npos);
    CHECK(msg.find("nonsense") != std::string::npos);
  }
}

TEST_CASE("config accepts the hyperparameter-table names verbatim") {
  const std::string text =
      "config_version = 1\n"
      "environment = chain\n"
      "Number of mixtures N = 4\n"
      "Intrinsic reward scale \xce\xb2 = 0.5\n"
      "Kernel \xce\xb5 = 0.01\n"
      "Kernel cluster distance \xce\xbe = 0.01\n"
      "Kernel num. neighbors used = 12\n"
      "Kernel pseudo-counts constant c = 0.002\n"
      "Kernel maximum similarity s_m = 9\n"
      "Adam clip norm = 20\n"
      "Retrace \xce\xbb = 0.9\n"
      "R2D2 reward transformation = identity\n"
      "Episodic memory capacity = 123\n"
      "# Episodes w/o wiping Episodic Memory = 3\n"
      "Replay priority exponent = 1.0\n"
      "Replay capacity = 5e3\n"
      "Minimum sequences to start replay = 10\n"
      "Actor update period = 50\n"
      "Target Q-network update period = 77\n"
      "Evaluation \xce\xb5 = 0\n"
      "Target \xce\xb5 = 0.02\n"
      "Discount r^e = 0.995\n"
      "Discount r^i = 0.97\n"
      "Learning rate (R2D2) = 0.001\n"
      "Learning rate (RND and Action prediction) = 0.002\n"
      "Action prediction network L2 weight = 0.0001\n"
      "RND clipping factor L = 4\n"
      "Cross Mixture Ratio = 0.25\n"
      "Batch size = 16\n"
      "Trace length = 20\n"
      "Replay period = 10\n"
      "Q-network filter sizes = (3, 3)\n"
      "Optimizer = Adam\n"
      "Embeddings memory mode = Ring buffer\n"
      "Embeddings target update period = once/episode\n"
      "Num. action repeats = 1\n";
  const ExperimentConfig cfg = parse_config_text(text);
  CHECK(cfg.num_mixtures == 4);
  CHECK(cfg.beta == doctest::Approx(0.5));
  CHECK(cfg.kernel_epsilon == doctest::Approx(0.01));
  CHECK(cfg.kernel_xi == doctest::Approx(0.01));
  CHECK(cfg.kernel_neighbors == 12);
  CHECK(cfg.kernel_c == doctest::Approx(0.002));
  CHECK(cfg.kernel_sm == doctest::Approx(9.0));
  CHECK(cfg.adam_clip_norm == doctest::Approx(20.0));
  CHECK(cfg.retrace_lambda == doctest::Approx(0.9));
  CHECK(cfg.reward_transform == "identity");
  CHECK(cfg.episodic_capacity == 123);
  CHECK(cfg.meta_episode_len == 3);
  CHECK(cfg.priority_exponent == doctest::Approx(1.0));
  CHECK(cfg.replay_capacity == 5000);
  CHECK(cfg.min_replay_sequences == 10);
  CHECK(cfg.actor_update_period == 50);
  CHECK(cfg.target_update_period == 77);
  CHECK(cfg.eval_epsilon == doctest::Approx(0.0));
  CHECK(cfg.target_epsilon == doctest::Approx(0.02));
  CHECK(cfg.gamma_max == doctest::Approx(0.995));
  CHECK(cfg.gamma_min == doctest::Approx(0.97));
  CHECK(cfg.lr_rl == doctest::Approx(0.001));
  CHECK(cfg.lr_aux == doctest::Approx(0.002));
  CHECK(cfg.l2_weight == doctest::Approx(0.0001));
  CHECK(cfg.rnd_clip == doctest::Approx(4.0));
  CHECK(cfg.cross_mixture_ratio == doctest::Approx(0.25));
  CHECK(cfg.batch_size == 16);
  CHECK(cfg.trace_length == 20);
  CHECK(cfg.replay_period == 10);
}

TEST_CASE("meta-episode memory grows across episodes and resets on schedule") {
  auto env = std::make_unique<StillEnv>(10);
  TestModels m = make_models(*env, 1, 61);
  ActorParams p = small_params(0, 0.3);
  p.meta_episode_len = 3;
  Actor actor(std::move(env), std::move(m.q), std::move(m.embedding), std::move(m.rnd), 0.3, p,
              67);
  // sample the memory just before each episode ends (the boundary itself
  // rolls begin_episode into the final run_steps call)
  std::vector<std::int64_t> sizes;
  for (int e = 0; e < 4; ++e) {
    actor.run_steps(9, nullptr, nullptr, nullptr, nullptr);
    sizes.push_back(actor.memory().count_inserted());
    actor.run_steps(1, nullptr, nullptr, nullptr, nullptr);
  }
  // arrivals accumulate across episodes 1..3 of the meta-episode, then wipe
  CHECK(sizes[0] == 10);
  CHECK(sizes[1] == 21);
  CHECK(sizes[2] == 32);
  CHECK(sizes[3] == 10);
}
