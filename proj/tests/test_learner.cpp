#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "neverup/learner.hpp"
#include "oracles.hpp"

using namespace neverup;

namespace {

constexpr int kCells = 1;
constexpr int kChannels = 3;
constexpr int kActions = 2;

Learner make_learner(LearnerConfig cfg, int mixtures = 2, std::uint64_t seed = 4) {
  Rng rng(seed);
  QNetwork online(kCells, kChannels, kActions, mixtures,
                  QNetConfig{.torso_hidden = 8, .gru_hidden = 6, .head_hidden = 8}, rng);
  QNetwork target(kCells, kChannels, kActions, mixtures,
                  QNetConfig{.torso_hidden = 8, .gru_hidden = 6, .head_hidden = 8}, rng);
  EmbeddingModel embedding(kCells, kChannels, kActions,
                           EmbeddingConfig{.embedding_dim = 4, .f_hidden = 8, .h_hidden = 8}, rng);
  RndModel rnd(kCells, kChannels, RndConfig{.output_dim = 4, .hidden = 8}, rng);
  MixtureSchedule schedule = make_schedule(mixtures, 0.3, 0.997, 0.99);
  return Learner(std::move(online), std::move(target), std::move(embedding), std::move(rnd),
                 std::move(schedule), cfg);
}

void zero_q(QNetwork& q) {
  for (auto& p : q.params()) p.tensor->fill(0.0f);
}

SequenceSample make_seq(int valid, int length, bool terminal, float r_ext, float r_int,
                        double beta, int beta_index, int hidden, int overlap = 0) {
  SequenceSample s;
  s.beta_index = beta_index;
  s.length = length;
  s.overlap = overlap;
  s.valid_len = valid;
  s.terminal = terminal;
  s.obs_cells = kCells;
  s.obs.assign(static_cast<std::size_t>(valid), 0);
  if (!terminal) s.final_obs.assign(kCells, 1);
  for (int t = 0; t < valid; ++t) {
    s.actions.push_back(t % kActions);
    s.r_ext.push_back(r_ext);
    s.r_int.push_back(r_int);
    s.r_aug.push_back(static_cast<float>(r_ext + beta * r_int));
    s.mu.push_back(0.5f);
  }
  s.initial_state = Tensor::zeros({1, hidden});
  return s;
}

}  // namespace

TEST_CASE("learner step is a no-op signal while the buffer is underfull") {
  LearnerConfig cfg;
  cfg.batch_size = 2;
  cfg.trace_length = 8;
  cfg.replay_period = 4;
  Learner learner = make_learner(cfg);
  ReplayBuffer buf(16, 0.9, 4);
  Rng rng(1);
  buf.insert(make_seq(6, 8, true, 0.0f, 0.0f, 0.0, 0, 6));
  const LearnerStats st = learner.step(buf, rng);
  CHECK_FALSE(st.stepped);
  CHECK(learner.steps_taken() == 0);
}

TEST_CASE("zero networks and zero rewards: zero loss, floor priorities") {
  LearnerConfig cfg;
  cfg.batch_size = 4;
  cfg.trace_length = 8;
  cfg.replay_period = 4;
  cfg.use_rnd = false;
  cfg.train_embedding = false;
  Learner learner = make_learner(cfg);
  zero_q(learner.online());
  zero_q(learner.target());
  ReplayBuffer buf(16, 0.9, 1);
  for (int i = 0; i < 4; ++i) buf.insert(make_seq(8, 8, true, 0.0f, 0.0f, 0.0, 0, 6));
  Rng rng(2);
  const LearnerStats st = learner.step(buf, rng);
  CHECK(st.stepped);
  CHECK(st.rl_loss == doctest::Approx(0.0));
  buf.for_each([](const SequenceSample& s) {
    CHECK(s.priority == ReplayBuffer::kPriorityFloor);
  });
}

TEST_CASE("CMR relabeling recomputes augmented rewards from the stored streams") {
  LearnerConfig cfg;
  cfg.trace_length = 4;
  cfg.replay_period = 2;
  cfg.retrace.use_squash = false;
  Learner learner = make_learner(cfg);
  zero_q(learner.online());
  zero_q(learner.target());
  // terminal one-step sequence: target = r under zero networks
  SequenceSample seq = make_seq(1, 4, true, 1.0f, 2.0f, 0.0, 0, 6);
  const auto t0 = learner.sequence_targets(seq, 0);  // beta_0 = 0
  const auto t1 = learner.sequence_targets(seq, 1);  // beta_1 = 0.3
  CHECK(t0[0] == doctest::Approx(1.0));
  CHECK(t1[0] == doctest::Approx(1.0 + 0.3 * 2.0));
}

TEST_CASE("exactly 5 tail frames per sequence feed the auxiliary losses") {
  LearnerConfig cfg;
  cfg.batch_size = 3;
  cfg.trace_length = 16;
  cfg.replay_period = 8;
  cfg.aux_frames_per_sequence = 5;
  Learner learner = make_learner(cfg);
  ReplayBuffer buf(16, 0.9, 1);
  for (int i = 0; i < 3; ++i) buf.insert(make_seq(12, 16, false, 0.0f, 0.1f, 0.3, 1, 6));
  Rng rng(3);
  const LearnerStats st = learner.step(buf, rng);
  CHECK(st.stepped);
  CHECK(st.embed_pairs == 15);  // 5 pairs per sequence
  CHECK(st.rnd_frames == 15);

  // short terminal sequences can offer fewer pairs than frames
  ReplayBuffer small(16, 0.9, 1);
  for (int i = 0; i < 3; ++i) small.insert(make_seq(3, 16, true, 0.0f, 0.1f, 0.3, 1, 6));
  const LearnerStats st2 = learner.step(small, rng);
  CHECK(st2.embed_pairs == 6);  // pairs (0,1) and (1,2): terminal obs is not stored
  CHECK(st2.rnd_frames == 9);
}

TEST_CASE("target network copies from online every target_update_period steps") {
  LearnerConfig cfg;
  cfg.batch_size = 2;
  cfg.trace_length = 8;
  cfg.replay_period = 4;
  cfg.target_update_period = 3;
  cfg.use_rnd = false;
  cfg.train_embedding = false;
  cfg.adam_rl.learning_rate = 1e-2f;
  Learner learner = make_learner(cfg);
  ReplayBuffer buf(16, 0.9, 1);
  for (int i = 0; i < 4; ++i) buf.insert(make_seq(8, 8, true, 1.0f, 0.0f, 0.0, 0, 6));
  Rng rng(5);

  auto hash_params = [](QNetwork& q) {
    std::uint64_t h = 1469598103934665603ULL;
    for (auto& p : q.params())
      for (float v : p.tensor->v) {
        const auto* b = reinterpret_cast<const unsigned char*>(&v);
        for (std::size_t i = 0; i < sizeof(float); ++i) {
          h ^= b[i];
          h *= 1099511628211ULL;
        }
      }
    return h;
  };

  learner.step(buf, rng);
  learner.step(buf, rng);
  CHECK(hash_params(learner.online()) != hash_params(learner.target()));
  learner.step(buf, rng);  // step 3: copy
  CHECK(hash_params(learner.online()) == hash_params(learner.target()));
}

TEST_CASE("burn-in: overlapped steps carry no loss") {
  // With overlap = valid_len - 1, only the last step trains. Zero nets make
  // its TD error equal the training reward, so the refreshed priority
  // reflects exactly one step.
  LearnerConfig cfg;
  cfg.batch_size = 2;
  cfg.trace_length = 8;
  cfg.replay_period = 4;
  cfg.use_rnd = false;
  cfg.train_embedding = false;
  cfg.retrace.use_squash = false;
  cfg.priority_max_weight = 0.0;  // priority = mean |td| over trained steps
  Learner learner = make_learner(cfg);
  zero_q(learner.online());
  zero_q(learner.target());
  ReplayBuffer buf(16, 0.9, 1);
  // steps 0..4 pay 0; step 5 (the only trained one) pays 7
  SequenceSample s = make_seq(6, 8, true, 0.0f, 0.0f, 0.0, 0, 6, /*overlap=*/4);
  for (int t = 0; t < 6; ++t) s.r_ext[static_cast<std::size_t>(t)] = t == 5 ? 7.0f : 0.0f;
  for (int t = 0; t < 6; ++t) s.r_aug[static_cast<std::size_t>(t)] = s.r_ext[static_cast<std::size_t>(t)];
  buf.insert(s);
  buf.insert(s);
  Rng rng(6);
  const LearnerStats st = learner.step(buf, rng);
  CHECK(st.stepped);
  // trained steps are t=4,5 with |td| ~ {0.07, 7}: mean ~ 3.5. Averaging over
  // all 6 steps (burn-in included) would give ~1.2 instead.
  double priority = 0.0;
  buf.for_each([&](const SequenceSample& q) { priority = q.priority; });
  CHECK(priority > 2.0);
  CHECK(priority < 5.0);
}

TEST_CASE("learner separates action values on a bandit-like stream") {
  LearnerConfig cfg;
  cfg.batch_size = 8;
  cfg.trace_length = 8;
  cfg.replay_period = 0;
  cfg.use_rnd = false;
  cfg.train_embedding = false;
  cfg.retrace.use_squash = false;
  cfg.target_update_period = 10;
  cfg.adam_rl.learning_rate = 5e-3f;
  Learner learner = make_learner(cfg, 1);
  ReplayBuffer buf(64, 0.9, 1);
  Rng rng(7);
  // action 1 always pays 1, action 0 pays nothing
  for (int i = 0; i < 32; ++i) {
    SequenceSample s = make_seq(8, 8, true, 0.0f, 0.0f, 0.3, 0, 6);
    for (int t = 0; t < 8; ++t) {
      const int a = rng.uniform_int(2);
      s.actions[static_cast<std::size_t>(t)] = a;
      s.r_ext[static_cast<std::size_t>(t)] = static_cast<float>(a);
      s.r_aug[static_cast<std::size_t>(t)] = static_cast<float>(a);
    }
    buf.insert(s);
  }
  for (int step = 0; step < 150; ++step) learner.step(buf, rng);

  CatBatch obs;
  obs.cells = kCells;
  obs.channels = kChannels;
  const std::uint8_t row[1] = {0};
  obs.append_row(row);
  Tensor hidden = learner.online().initial_state(1);
  const std::vector<int> mix{0};
  const std::vector<int> pa{-1};
  const std::vector<float> pri{0.0f};
  const std::vector<float> pre{0.0f};
  const Tensor q = learner.online().apply_step(
      QNetwork::StepInput{.obs = &obs, .mixture = &mix, .prev_action = &pa, .prev_r_int = &pri, .prev_r_ext = &pre},
      hidden);
  CHECK(q.at(0, 1) > q.at(0, 0) + 0.2f);
}
