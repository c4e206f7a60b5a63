#pragma once

#include <atomic>
#include <memory>

#include "neverup/combiner.hpp"
#include "neverup/embedding.hpp"
#include "neverup/env/env.hpp"
#include "neverup/episodic_memory.hpp"
#include "neverup/metrics.hpp"
#include "neverup/qnet.hpp"
#include "neverup/replay.hpp"
#include "neverup/rnd.hpp"
#include "neverup/snapshot.hpp"

namespace neverup {

struct ActorParams {
  int id = 0;
  int mixture = 0;
  double epsilon = 0.01;
  int meta_episode_len = 1;
  int trace_length = 80;
  int replay_period = 40;  // overlap between adjacent sequences
  int snapshot_refresh_period = 100;  // env steps between Q refreshes
  int episodic_capacity = 30000;
  KernelConfig kernel;
  CombinerConfig combiner;
  bool evaluator = false;  // no replay inserts, eval-tagged metrics
};

struct EpisodeRecord {
  int actor_id = 0;
  std::int64_t episode_id = 0;
  int mixture = 0;
  int length = 0;
  double return_ext = 0.0;
  double return_int = 0.0;
  int unique_states = 0;
  double coverage = 0.0;
};

// One acting worker: owns an environment, an episodic memory, RND running
// stats, and private copies of the networks refreshed from the snapshot
// mailbox (Q every `snapshot_refresh_period` steps, embedding/RND once per
// episode). Emits overlapping fixed-length sequences into replay and one
// EpisodeRecord per finished episode.
class Actor {
 public:
  Actor(std::unique_ptr<Env> env, QNetwork q, EmbeddingModel embedding, RndModel rnd,
        double beta, ActorParams params, std::uint64_t seed);

  // Advances exactly `n` environment frames (finishing episodes as needed).
  // Any of the sinks may be null.
  void run_steps(std::int64_t n, ReplayBuffer* replay, const SnapshotMailbox* mailbox,
                 MetricsSink* metrics, std::atomic<std::int64_t>* global_frames);

  // Runs `n` whole episodes (evaluator use); returns their records. Metric
  // rows are stamped with `frame_stamp` (the training frame count).
  std::vector<EpisodeRecord> run_episodes(int n, const SnapshotMailbox* mailbox,
                                          MetricsSink* metrics, std::int64_t frame_stamp);

  const ActorParams& params() const { return params_; }
  std::int64_t frames() const { return frames_; }
  std::int64_t episodes_completed() const { return episodes_; }
  std::uint64_t snapshot_version() const { return snapshot_version_; }
  std::int64_t steps_since_refresh() const { return steps_since_refresh_; }
  const EpisodeRecord& last_episode() const { return last_episode_; }
  EpisodicMemory& memory() { return memory_; }
  Env& env() { return *env_; }

 private:
  struct Transition {
    int action;
    float r_ext, r_int, r_aug, mu;
    bool done;
  };
  struct WindowStart {
    Tensor state;  // 1 x H before the window's first step
    int prev_action;
    float prev_r_int, prev_r_ext;
  };

  void begin_episode();
  void take_step(ReplayBuffer* replay, const SnapshotMailbox* mailbox);
  void maybe_refresh_q(const SnapshotMailbox* mailbox);
  void refresh_aux(const SnapshotMailbox* mailbox);
  double arrive(const std::vector<std::uint8_t>& obs_row);  // intrinsic reward of a state
  void emit_ready_sequences(ReplayBuffer* replay, bool episode_over);
  void finish_episode(ReplayBuffer* replay, MetricsSink* metrics);

  std::unique_ptr<Env> env_;
  QNetwork q_;
  EmbeddingModel embedding_;
  RndModel rnd_;
  double beta_;
  ActorParams params_;
  Rng rng_;
  EpisodicMemory memory_;
  EpisodicMemory::Scratch scratch_;
  RunningStats rnd_stats_;

  // episode state
  Tensor hidden_;
  int prev_action_ = -1;
  float prev_r_int_ = 0.0f, prev_r_ext_ = 0.0f;
  std::vector<std::uint8_t> episode_obs_;  // per-step obs rows
  std::vector<Transition> transitions_;
  std::vector<WindowStart> windows_;
  int windows_emitted_ = 0;
  double return_ext_ = 0.0, return_int_ = 0.0;

  std::int64_t frames_ = 0;
  std::int64_t episodes_ = 0;
  std::int64_t steps_since_refresh_ = 0;
  std::uint64_t snapshot_version_ = 0;
  std::int64_t metric_frame_ = -1;  // -1: stamp rows with own frame count
  EpisodeRecord last_episode_;
};

}  // namespace neverup
