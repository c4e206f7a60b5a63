#include "neverup/learner.hpp"

#include <algorithm>
#include <cmath>

#include "neverup/errors.hpp"

namespace neverup {

void LearnerConfig::validate() const {
  if (batch_size < 1) throw ConfigError("learner: batch_size must be positive");
  if (trace_length < 1) throw ConfigError("learner: trace_length must be positive");
  if (replay_period < 0 || replay_period >= trace_length)
    throw ConfigError("learner: replay_period must be in [0, trace_length)");
  if (target_update_period < 1) throw ConfigError("learner: target_update_period must be positive");
  if (aux_frames_per_sequence < 1)
    throw ConfigError("learner: aux_frames_per_sequence must be positive");
  if (priority_max_weight < 0.0 || priority_max_weight > 1.0)
    throw ConfigError("learner: priority_max_weight must be in [0,1]");
  if (cross_mixture_ratio < 0.0 || cross_mixture_ratio > 1.0)
    throw ConfigError("learner: cross_mixture_ratio must be in [0,1]");
  retrace.validate();
  adam_rl.validate();
  adam_aux.validate();
}

Learner::Learner(QNetwork online, QNetwork target, EmbeddingModel embedding, RndModel rnd,
                 MixtureSchedule schedule, LearnerConfig cfg)
    : online_(std::move(online)),
      target_(std::move(target)),
      embedding_(std::move(embedding)),
      rnd_(std::move(rnd)),
      schedule_(std::move(schedule)),
      cfg_(cfg),
      opt_rl_(cfg.adam_rl),
      opt_embed_(cfg.adam_aux),
      opt_rnd_(cfg.adam_aux) {
  cfg_.validate();
  if (schedule_.size() != online_.num_mixtures())
    throw ConfigError("learner: schedule size does not match the Q-network conditioning");
  target_.copy_params_from(online_);
}

// Batched per-timestep inputs for an unroll over steps 0..T (inclusive; step
// T is the bootstrap state after the last transition).
namespace {
struct Unrolled {
  int batch = 0;
  int steps = 0;  // T+1
  std::vector<CatBatch> obs;
  std::vector<std::vector<int>> prev_action;
  std::vector<std::vector<float>> prev_ri;
  std::vector<std::vector<float>> prev_re;
  std::vector<int> mixture;  // per row, constant over time
  Tensor initial_state;      // B x H
};

Unrolled build_inputs(const std::vector<SequenceSample>& seqs,
                               const std::vector<int>& train_mixture, int trace_length,
                               int cells, int channels, int hidden) {
  Unrolled u;
  u.batch = static_cast<int>(seqs.size());
  u.steps = trace_length + 1;
  u.mixture = train_mixture;
  u.initial_state = Tensor::zeros({u.batch, hidden});
  u.obs.assign(static_cast<std::size_t>(u.steps), CatBatch{});
  u.prev_action.assign(static_cast<std::size_t>(u.steps), std::vector<int>(static_cast<std::size_t>(u.batch), -1));
  u.prev_ri.assign(static_cast<std::size_t>(u.steps), std::vector<float>(static_cast<std::size_t>(u.batch), 0.0f));
  u.prev_re.assign(static_cast<std::size_t>(u.steps), std::vector<float>(static_cast<std::size_t>(u.batch), 0.0f));

  const std::vector<std::uint8_t> pad(static_cast<std::size_t>(cells), 0);
  for (int t = 0; t < u.steps; ++t) {
    CatBatch& ob = u.obs[static_cast<std::size_t>(t)];
    ob.cells = cells;
    ob.channels = channels;
    ob.cat.reserve(static_cast<std::size_t>(u.batch) * cells);
  }

  for (int b = 0; b < u.batch; ++b) {
    const SequenceSample& s = seqs[static_cast<std::size_t>(b)];
    if (s.obs_cells != cells)
      throw DataError("learner: sequence obs_cells does not match the network");
    if (s.valid_len > trace_length)
      throw DataError("learner: sequence longer than the configured trace length");
    if (s.initial_state.size() != hidden)
      throw DataError("learner: stored recurrent state width mismatch");
    for (int j = 0; j < hidden; ++j) u.initial_state.at(b, j) = s.initial_state.v[static_cast<std::size_t>(j)];

    for (int t = 0; t < u.steps; ++t) {
      const std::uint8_t* row;
      if (t < s.valid_len) {
        row = s.obs_row(t);
      } else if (t == s.valid_len && !s.terminal) {
        row = s.final_obs.data();
      } else {
        row = pad.data();
      }
      u.obs[static_cast<std::size_t>(t)].append_row(row);

      auto& pa = u.prev_action[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)];
      auto& ri = u.prev_ri[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)];
      auto& re = u.prev_re[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)];
      if (t == 0) {
        pa = s.prev_action0;
        ri = s.prev_r_int0;
        re = s.prev_r_ext0;
      } else {
        const int src = std::min(t - 1, s.valid_len - 1);
        pa = s.actions[static_cast<std::size_t>(src)];
        ri = s.r_int[static_cast<std::size_t>(src)];
        re = s.r_ext[static_cast<std::size_t>(src)];
      }
    }
  }
  return u;
}

// No-grad unroll: per-step Q values under the given network.
std::vector<Tensor> unroll_values(const QNetwork& net, const Unrolled& u) {
  std::vector<Tensor> out;
  out.reserve(static_cast<std::size_t>(u.steps));
  Tensor state = u.initial_state;
  for (int t = 0; t < u.steps; ++t) {
    const QNetwork::StepInput in{.obs = &u.obs[static_cast<std::size_t>(t)],
                                 .mixture = &u.mixture,
                                 .prev_action = &u.prev_action[static_cast<std::size_t>(t)],
                                 .prev_r_int = &u.prev_ri[static_cast<std::size_t>(t)],
                                 .prev_r_ext = &u.prev_re[static_cast<std::size_t>(t)]};
    out.push_back(net.apply_step(in, state));
  }
  return out;
}

std::vector<float> row_of(const Tensor& t, int r) {
  std::vector<float> out(static_cast<std::size_t>(t.cols()));
  for (int j = 0; j < t.cols(); ++j) out[static_cast<std::size_t>(j)] = t.at(r, j);
  return out;
}

}  // namespace

std::vector<double> Learner::sequence_targets(const SequenceSample& seq, int train_mixture) const {
  seq.check();
  const std::vector<SequenceSample> seqs{seq};
  const std::vector<int> mixtures{train_mixture};
  const Unrolled u = build_inputs(seqs, mixtures, std::max(seq.length, seq.valid_len),
                                  online_.obs_cells(), online_.obs_channels(), online_.gru_hidden());
  const std::vector<Tensor> qt = unroll_values(target_, u);
  const std::vector<Tensor> qo = unroll_values(online_, u);

  RetraceInputs in;
  in.gamma = schedule_.gamma(train_mixture);
  in.terminal = seq.terminal;
  const double beta = schedule_.beta(train_mixture);
  for (int t = 0; t < seq.valid_len; ++t) {
    in.actions.push_back(seq.actions[static_cast<std::size_t>(t)]);
    in.mu.push_back(seq.mu[static_cast<std::size_t>(t)]);
    in.rewards.push_back(train_mixture == seq.beta_index
                             ? seq.r_aug[static_cast<std::size_t>(t)]
                             : augmented_reward(seq.r_ext[static_cast<std::size_t>(t)],
                                                seq.r_int[static_cast<std::size_t>(t)], beta));
    in.q_target.push_back(row_of(qt[static_cast<std::size_t>(t)], 0));
    in.q_online.push_back(row_of(qo[static_cast<std::size_t>(t)], 0));
  }
  in.q_target.push_back(row_of(qt[static_cast<std::size_t>(seq.valid_len)], 0));
  in.q_online.push_back(row_of(qo[static_cast<std::size_t>(seq.valid_len)], 0));
  return retrace_targets(in, cfg_.retrace);
}

LearnerStats Learner::step(ReplayBuffer& buffer, Rng& rng) {
  LearnerStats stats;
  auto batch = buffer.sample(cfg_.batch_size, rng);
  if (!batch) return stats;  // underfull: explicit no-op
  const int B = static_cast<int>(batch->sequences.size());
  const int T = cfg_.trace_length;

  // Cross-mixture relabeling: with probability CMR a sequence trains a
  // uniformly drawn mixture instead of the one that generated it.
  std::vector<int> train_mixture(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    const SequenceSample& s = batch->sequences[static_cast<std::size_t>(b)];
    train_mixture[static_cast<std::size_t>(b)] =
        (cfg_.cross_mixture_ratio > 0.0 && rng.uniform() < cfg_.cross_mixture_ratio)
            ? rng.uniform_int(schedule_.size())
            : s.beta_index;
  }

  const Unrolled u = build_inputs(batch->sequences, train_mixture, T, online_.obs_cells(),
                                  online_.obs_channels(), online_.gru_hidden());

  // Target-network values, no gradients.
  const std::vector<Tensor> qt = unroll_values(target_, u);

  // Online unroll on the tape. BPTT is cut per-row at the burn-in boundary:
  // rows whose sequence overlaps its predecessor carry no gradient through
  // the first `overlap` steps, only state.
  Graph g;
  std::vector<int> q_nodes(static_cast<std::size_t>(u.steps));
  Network::StateNodes state{{g.leaf(u.initial_state)}};
  for (int t = 0; t < u.steps; ++t) {
    bool cut_here = false;
    std::vector<float> keep(static_cast<std::size_t>(B), 1.0f);
    for (int b = 0; b < B; ++b)
      if (t > 0 && batch->sequences[static_cast<std::size_t>(b)].overlap == t) {
        keep[static_cast<std::size_t>(b)] = 0.0f;
        cut_here = true;
      }
    if (cut_here) state.h[0] = g.row_stop_grad(state.h[0], std::move(keep));
    const QNetwork::StepInput in{.obs = &u.obs[static_cast<std::size_t>(t)],
                                 .mixture = &u.mixture,
                                 .prev_action = &u.prev_action[static_cast<std::size_t>(t)],
                                 .prev_r_int = &u.prev_ri[static_cast<std::size_t>(t)],
                                 .prev_r_ext = &u.prev_re[static_cast<std::size_t>(t)]};
    Network::StateNodes next;
    q_nodes[static_cast<std::size_t>(t)] = online_.forward_step(g, in, &state, &next);
    state = next;
  }

  // Retrace targets per sequence from the unrolled values.
  std::vector<std::vector<double>> targets(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    const SequenceSample& s = batch->sequences[static_cast<std::size_t>(b)];
    const int m = train_mixture[static_cast<std::size_t>(b)];
    RetraceInputs in;
    in.gamma = schedule_.gamma(m);
    in.terminal = s.terminal;
    const double beta = schedule_.beta(m);
    in.actions.assign(s.actions.begin(), s.actions.end());
    in.mu.assign(s.mu.begin(), s.mu.end());
    for (int t = 0; t < s.valid_len; ++t)
      in.rewards.push_back(m == s.beta_index
                               ? s.r_aug[static_cast<std::size_t>(t)]
                               : augmented_reward(s.r_ext[static_cast<std::size_t>(t)],
                                                  s.r_int[static_cast<std::size_t>(t)], beta));
    for (int t = 0; t <= s.valid_len; ++t) {
      in.q_target.push_back(row_of(qt[static_cast<std::size_t>(t)], b));
      in.q_online.push_back(row_of(g.value(q_nodes[static_cast<std::size_t>(t)]), b));
    }
    targets[static_cast<std::size_t>(b)] = retrace_targets(in, cfg_.retrace);
  }

  // Masked squared error over trained steps; TD errors feed the priorities.
  std::vector<double> td_max(static_cast<std::size_t>(B), 0.0);
  std::vector<double> td_sum(static_cast<std::size_t>(B), 0.0);
  std::vector<int> td_count(static_cast<std::size_t>(B), 0);
  float mass = 0.0f;
  int loss_node = -1;
  for (int t = 0; t < T; ++t) {
    std::vector<int> act(static_cast<std::size_t>(B), 0);
    std::vector<float> mask(static_cast<std::size_t>(B), 0.0f);
    Tensor target_col = Tensor::zeros({B, 1});
    bool any = false;
    for (int b = 0; b < B; ++b) {
      const SequenceSample& s = batch->sequences[static_cast<std::size_t>(b)];
      if (t < s.overlap || t >= s.valid_len) continue;
      act[static_cast<std::size_t>(b)] = s.actions[static_cast<std::size_t>(t)];
      mask[static_cast<std::size_t>(b)] = 1.0f;
      const double y = targets[static_cast<std::size_t>(b)][static_cast<std::size_t>(t)];
      target_col.at(b, 0) = static_cast<float>(y);
      const double q = g.value(q_nodes[static_cast<std::size_t>(t)])
                           .at(b, s.actions[static_cast<std::size_t>(t)]);
      const double td = y - q;
      td_max[static_cast<std::size_t>(b)] = std::max(td_max[static_cast<std::size_t>(b)], std::abs(td));
      td_sum[static_cast<std::size_t>(b)] += std::abs(td);
      ++td_count[static_cast<std::size_t>(b)];
      mass += 1.0f;
      any = true;
    }
    if (!any) continue;
    const int q_taken = g.gather_cols(q_nodes[static_cast<std::size_t>(t)], std::move(act));
    const int diff = g.mul(g.sub(q_taken, g.leaf(std::move(target_col))),
                           g.leaf(Tensor({B, 1}, std::vector<float>(mask.begin(), mask.end()))));
    const int sq = g.sum_squares(diff);
    loss_node = loss_node < 0 ? sq : g.add(loss_node, sq);
  }
  if (loss_node < 0) throw DataError("learner: batch contained no trainable steps");
  loss_node = g.scale_add(loss_node, mass > 0.0f ? 1.0f / mass : 0.0f, 0.0f);
  stats.rl_loss = g.value(loss_node).v[0];

  g.backward(loss_node);
  opt_rl_.step(online_.params(), collect_gradients(g, online_.params()));

  // Fresh priorities for the sampled slots.
  std::vector<float> new_priorities(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    const double mean_td =
        td_count[static_cast<std::size_t>(b)] > 0
            ? td_sum[static_cast<std::size_t>(b)] / td_count[static_cast<std::size_t>(b)]
            : 0.0;
    new_priorities[static_cast<std::size_t>(b)] = static_cast<float>(
        cfg_.priority_max_weight * td_max[static_cast<std::size_t>(b)] +
        (1.0 - cfg_.priority_max_weight) * mean_td);
  }
  buffer.update_priorities(batch->tickets, new_priorities);

  // Auxiliary losses on each sequence's tail frames: consecutive observation
  // pairs for the inverse-dynamics loss, arrived-at states for RND.
  if (cfg_.train_embedding) {
    CatBatch x_t{online_.obs_cells(), online_.obs_channels(), {}};
    CatBatch x_t1{online_.obs_cells(), online_.obs_channels(), {}};
    std::vector<int> actions;
    for (int b = 0; b < B; ++b) {
      const SequenceSample& s = batch->sequences[static_cast<std::size_t>(b)];
      // pairs (t, t+1); the final transition pairs with final_obs when the
      // episode continued
      const int last_pair = s.terminal ? s.valid_len - 2 : s.valid_len - 1;
      const int first_pair = std::max(0, last_pair - cfg_.aux_frames_per_sequence + 1);
      for (int t = first_pair; t <= last_pair; ++t) {
        x_t.append_row(s.obs_row(t));
        x_t1.append_row(t + 1 < s.valid_len ? s.obs_row(t + 1) : s.final_obs.data());
        actions.push_back(s.actions[static_cast<std::size_t>(t)]);
      }
    }
    if (!actions.empty()) {
      stats.embed_pairs = static_cast<int>(actions.size());
      Graph ge;
      const int loss = embedding_.build_loss(ge, Network::Input{.cat = &x_t},
                                             Network::Input{.cat = &x_t1}, actions);
      stats.embed_loss = ge.value(loss).v[0];
      ge.backward(loss);
      opt_embed_.step(embedding_.trainable_params(),
                      collect_gradients(ge, embedding_.trainable_params()));
    }
  }

  if (cfg_.use_rnd) {
    CatBatch tail{online_.obs_cells(), online_.obs_channels(), {}};
    for (int b = 0; b < B; ++b) {
      const SequenceSample& s = batch->sequences[static_cast<std::size_t>(b)];
      const int first = std::max(0, s.valid_len - cfg_.aux_frames_per_sequence);
      for (int t = first; t < s.valid_len; ++t) tail.append_row(s.obs_row(t));
    }
    stats.rnd_frames = tail.rows();
    Graph gr;
    const int loss = rnd_.build_predictor_loss(gr, Network::Input{.cat = &tail});
    stats.rnd_loss = gr.value(loss).v[0];
    gr.backward(loss);
    opt_rnd_.step(rnd_.trainable_params(), collect_gradients(gr, rnd_.trainable_params()));
  }

  ++steps_;
  stats.steps = steps_;
  stats.stepped = true;
  if (steps_ % cfg_.target_update_period == 0) target_.copy_params_from(online_);
  return stats;
}

}  // namespace neverup
