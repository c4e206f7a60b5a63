#include "neverup/actor.hpp"

#include <algorithm>

#include "neverup/checkpoint.hpp"
#include "neverup/errors.hpp"

namespace neverup {

Actor::Actor(std::unique_ptr<Env> env, QNetwork q, EmbeddingModel embedding, RndModel rnd,
             double beta, ActorParams params, std::uint64_t seed)
    : env_(std::move(env)),
      q_(std::move(q)),
      embedding_(std::move(embedding)),
      rnd_(std::move(rnd)),
      beta_(beta),
      params_(std::move(params)),
      rng_(seed),
      memory_(params_.episodic_capacity, embedding_.embedding_dim()),
      hidden_(q_.initial_state(1)) {
  params_.kernel.validate();
  params_.combiner.validate();
  if (params_.trace_length <= params_.replay_period)
    throw ConfigError("actor: trace_length must exceed replay_period");
  begin_episode();
}

void Actor::maybe_refresh_q(const SnapshotMailbox* mailbox) {
  if (mailbox == nullptr) return;
  if (steps_since_refresh_ < params_.snapshot_refresh_period) return;
  auto snap = mailbox->latest();
  steps_since_refresh_ = 0;
  if (!snap || snap->version == snapshot_version_) return;
  restore_params(q_.params(), snap->q_params);
  snapshot_version_ = snap->version;
}

void Actor::refresh_aux(const SnapshotMailbox* mailbox) {
  if (mailbox == nullptr) return;
  auto snap = mailbox->latest();
  if (!snap) return;
  if (!snap->embed_params.empty()) restore_params(embedding_.all_params(), snap->embed_params);
  if (!snap->rnd_params.empty()) restore_params(rnd_.all_params(), snap->rnd_params);
  // keep Q in sync at the boundary as well
  if (snap->version != snapshot_version_) {
    restore_params(q_.params(), snap->q_params);
    snapshot_version_ = snap->version;
  }
}

double Actor::arrive(const std::vector<std::uint8_t>& obs_row) {
  const CatBatch obs = CatBatch::from_row(env_->obs_cells(), env_->obs_channels(), obs_row.data());
  const Tensor e = embedding_.embed(obs);
  const double r_episodic = memory_.episodic_reward(params_.kernel, e.v.data(), scratch_);
  memory_.insert(e.v.data());
  double alpha = 1.0;
  if (params_.combiner.use_rnd) {
    const double err = rnd_.error(obs);
    rnd_stats_.push(err);
    alpha = rnd_alpha(rnd_stats_, err);
  }
  return intrinsic_reward(r_episodic, alpha, params_.combiner);
}

void Actor::begin_episode() {
  env_->reset();
  memory_reset(memory_, params_.meta_episode_len, episodes_);
  hidden_ = q_.initial_state(1);
  prev_action_ = -1;
  prev_r_ext_ = 0.0f;
  episode_obs_.clear();
  transitions_.clear();
  windows_.clear();
  windows_emitted_ = 0;
  return_ext_ = 0.0;
  return_int_ = 0.0;
  // the initial state is "arrived at" with no transition
  prev_r_int_ = static_cast<float>(arrive(env_->obs()));
}

void Actor::take_step(ReplayBuffer* replay, const SnapshotMailbox* mailbox) {
  maybe_refresh_q(mailbox);

  const int stride = params_.trace_length - params_.replay_period;
  if (static_cast<int>(transitions_.size()) % stride == 0)
    windows_.push_back({hidden_, prev_action_, prev_r_int_, prev_r_ext_});

  const std::vector<std::uint8_t>& obs_row = env_->obs();
  episode_obs_.insert(episode_obs_.end(), obs_row.begin(), obs_row.end());
  const CatBatch obs = CatBatch::from_row(env_->obs_cells(), env_->obs_channels(), obs_row.data());
  const ActResult chosen = act(q_, obs, prev_action_, prev_r_int_, prev_r_ext_, params_.mixture,
                               hidden_, params_.epsilon, rng_);

  const double r_ext = env_->step(chosen.action);
  const bool done = env_->done();
  const double r_int = arrive(env_->obs());
  const double r_aug = augmented_reward(r_ext, r_int, beta_);

  transitions_.push_back({chosen.action, static_cast<float>(r_ext), static_cast<float>(r_int),
                          static_cast<float>(r_aug), static_cast<float>(chosen.mu_prob), done});
  return_ext_ += r_ext;
  return_int_ += r_int;
  prev_action_ = chosen.action;
  prev_r_ext_ = static_cast<float>(r_ext);
  prev_r_int_ = static_cast<float>(r_int);
  ++frames_;
  ++steps_since_refresh_;

  if (replay != nullptr && !params_.evaluator) emit_ready_sequences(replay, done);
}

void Actor::emit_ready_sequences(ReplayBuffer* replay, bool episode_over) {
  const int stride = params_.trace_length - params_.replay_period;
  const int total = static_cast<int>(transitions_.size());
  const int cells = env_->obs_cells();
  for (;; ++windows_emitted_) {
    const int start = windows_emitted_ * stride;
    const int have = total - start;
    if (have <= 0) break;
    const bool full = have >= params_.trace_length;
    if (!full && !episode_over) break;
    const int overlap = start == 0 ? 0 : params_.replay_period;
    const int valid = std::min(params_.trace_length, have);
    if (valid <= overlap) break;  // tail fully covered by the previous window

    SequenceSample s;
    s.beta_index = params_.mixture;
    s.length = params_.trace_length;
    s.overlap = overlap;
    s.valid_len = valid;
    s.obs_cells = cells;
    s.actor_id = params_.id;
    s.episode_id = episodes_;
    s.start_step = start;
    const WindowStart& w = windows_.at(static_cast<std::size_t>(windows_emitted_));
    s.initial_state = w.state;
    s.prev_action0 = w.prev_action;
    s.prev_r_int0 = w.prev_r_int;
    s.prev_r_ext0 = w.prev_r_ext;
    s.obs.assign(episode_obs_.begin() + static_cast<std::ptrdiff_t>(start) * cells,
                 episode_obs_.begin() + static_cast<std::ptrdiff_t>(start + valid) * cells);
    for (int t = start; t < start + valid; ++t) {
      const Transition& tr = transitions_[static_cast<std::size_t>(t)];
      s.actions.push_back(tr.action);
      s.r_ext.push_back(tr.r_ext);
      s.r_int.push_back(tr.r_int);
      s.r_aug.push_back(tr.r_aug);
      s.mu.push_back(tr.mu);
    }
    s.terminal = transitions_[static_cast<std::size_t>(start + valid - 1)].done;
    if (!s.terminal) {
      if (start + valid < total) {
        // bootstrap state is the next stored step's observation
        s.final_obs.assign(episode_obs_.begin() + static_cast<std::ptrdiff_t>(start + valid) * cells,
                           episode_obs_.begin() + static_cast<std::ptrdiff_t>(start + valid + 1) * cells);
      } else {
        s.final_obs = env_->obs();  // current (not yet acted-on) observation
      }
    }
    s.priority = static_cast<float>(std::max(replay->max_priority(), 1.0));
    replay->insert(std::move(s));
  }
}

void Actor::finish_episode(ReplayBuffer* replay, MetricsSink* metrics) {
  (void)replay;
  last_episode_ = EpisodeRecord{
      .actor_id = params_.id,
      .episode_id = episodes_,
      .mixture = params_.mixture,
      .length = static_cast<int>(transitions_.size()),
      .return_ext = return_ext_,
      .return_int = return_int_,
      .unique_states = env_->unique_states(),
      .coverage = env_->coverage(),
  };
  ++episodes_;
  if (metrics != nullptr) {
    const char* prefix = params_.evaluator ? "eval" : "episode";
    const std::int64_t frame = metric_frame_ >= 0 ? metric_frame_ : frames_;
    auto emit = [&](const std::string& tag, double value) {
      // wall_time is stamped by the sink
      metrics->record({0.0, frame, std::string(prefix) + "/" + tag, params_.mixture, value});
    };
    emit("return_ext", last_episode_.return_ext);
    emit("return_int", last_episode_.return_int);
    emit("length", last_episode_.length);
    emit("unique_states", last_episode_.unique_states);
    emit("coverage", last_episode_.coverage);
  }
}

void Actor::run_steps(std::int64_t n, ReplayBuffer* replay, const SnapshotMailbox* mailbox,
                      MetricsSink* metrics, std::atomic<std::int64_t>* global_frames) {
  for (std::int64_t i = 0; i < n; ++i) {
    take_step(replay, mailbox);
    if (global_frames != nullptr) {
      metric_frame_ = global_frames->fetch_add(1, std::memory_order_relaxed) + 1;
    }
    if (env_->done()) {
      finish_episode(replay, metrics);
      refresh_aux(mailbox);
      begin_episode();
    }
  }
}

std::vector<EpisodeRecord> Actor::run_episodes(int n, const SnapshotMailbox* mailbox,
                                               MetricsSink* metrics, std::int64_t frame_stamp) {
  metric_frame_ = frame_stamp;
  std::vector<EpisodeRecord> records;
  records.reserve(static_cast<std::size_t>(n));
  refresh_aux(mailbox);
  for (int e = 0; e < n; ++e) {
    begin_episode();
    while (!env_->done()) take_step(nullptr, nullptr);
    finish_episode(nullptr, metrics);
    records.push_back(last_episode_);
  }
  return records;
}

}  // namespace neverup
