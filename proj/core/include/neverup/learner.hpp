#pragma once

#include "neverup/adam.hpp"
#include "neverup/combiner.hpp"
#include "neverup/embedding.hpp"
#include "neverup/qnet.hpp"
#include "neverup/replay.hpp"
#include "neverup/retrace.hpp"
#include "neverup/rnd.hpp"

namespace neverup {

struct LearnerConfig {
  int batch_size = 64;
  int trace_length = 80;
  int replay_period = 40;  // sequence overlap; also the burn-in span
  int target_update_period = 1500;
  int aux_frames_per_sequence = 5;  // tail frames feeding the auxiliary losses
  double priority_max_weight = 0.9;  // p = w*max|td| + (1-w)*mean|td|
  double cross_mixture_ratio = 0.0;
  bool use_rnd = true;
  bool train_embedding = true;
  RetraceConfig retrace;
  AdamConfig adam_rl{.learning_rate = 1e-4f};
  AdamConfig adam_aux{.learning_rate = 5e-4f};

  void validate() const;
};

struct LearnerStats {
  bool stepped = false;  // false: buffer underfull, nothing done
  double rl_loss = 0.0;
  double embed_loss = 0.0;
  double rnd_loss = 0.0;
  int embed_pairs = 0;  // transition pairs fed to the inverse-dynamics loss
  int rnd_frames = 0;   // frames fed to the RND predictor loss
  std::int64_t steps = 0;
};

// Owns the online/target Q-networks and the auxiliary models; one step
// samples a prioritized batch, trains the transformed-Retrace loss over the
// non-burn-in steps, trains the inverse-dynamics and RND predictors on each
// sequence's tail frames, refreshes priorities, and periodically copies the
// target network.
class Learner {
 public:
  Learner(QNetwork online, QNetwork target, EmbeddingModel embedding, RndModel rnd,
          MixtureSchedule schedule, LearnerConfig cfg);

  LearnerStats step(ReplayBuffer& buffer, Rng& rng);

  QNetwork& online() { return online_; }
  const QNetwork& online() const { return online_; }
  QNetwork& target() { return target_; }
  EmbeddingModel& embedding() { return embedding_; }
  const EmbeddingModel& embedding() const { return embedding_; }
  RndModel& rnd() { return rnd_; }
  const RndModel& rnd() const { return rnd_; }
  const MixtureSchedule& schedule() const { return schedule_; }
  const LearnerConfig& config() const { return cfg_; }
  std::int64_t steps_taken() const { return steps_; }

  // Exposed for targeted tests: retrace targets for one (possibly relabeled)
  // sequence under the current networks.
  std::vector<double> sequence_targets(const SequenceSample& seq, int train_mixture) const;

 private:
  QNetwork online_;
  QNetwork target_;
  EmbeddingModel embedding_;
  RndModel rnd_;
  MixtureSchedule schedule_;
  LearnerConfig cfg_;
  AdamOpt opt_rl_;
  AdamOpt opt_embed_;
  AdamOpt opt_rnd_;
  std::int64_t steps_ = 0;
};

}  // namespace neverup
