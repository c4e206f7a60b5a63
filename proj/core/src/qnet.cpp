#include "neverup/qnet.hpp"

#include <array>

#include "neverup/errors.hpp"

namespace neverup {

QNetwork::QNetwork(int obs_cells, int obs_channels, int action_count, int num_mixtures,
                   const QNetConfig& cfg, Rng& rng)
    : cfg_(cfg),
      action_count_(action_count),
      num_mixtures_(num_mixtures),
      torso_(Network(obs_cells, obs_channels, "q.torso")),
      gru_(Network(cfg.torso_hidden + num_mixtures + action_count + 2, "q.gru")),
      value_head_(Network(cfg.gru_hidden, "q.v")),
      advantage_head_(Network(cfg.gru_hidden, "q.a")) {
  if (action_count < 1) throw ConfigError("qnet: action_count must be positive");
  if (num_mixtures < 1) throw ConfigError("qnet: num_mixtures must be positive");
  torso_.dense(cfg.torso_hidden).relu();
  gru_.gru(cfg.gru_hidden);
  value_head_.dense(cfg.head_hidden).relu().dense(1);
  advantage_head_.dense(cfg.head_hidden).relu().dense(action_count);
  init(rng);
}

void QNetwork::init(Rng& rng) {
  torso_.init(rng);
  gru_.init(rng);
  value_head_.init(rng);
  advantage_head_.init(rng);
}

Tensor QNetwork::build_extras(const StepInput& in, int rows) const {
  const int width = num_mixtures_ + action_count_ + 2;
  Tensor extras = Tensor::zeros({rows, width});
  for (int r = 0; r < rows; ++r) {
    const int m = (*in.mixture)[static_cast<std::size_t>(r)];
    if (m < 0 || m >= num_mixtures_)
      throw ConfigError("qnet: mixture index " + std::to_string(m) + " out of range");
    extras.at(r, m) = 1.0f;
    const int pa = (*in.prev_action)[static_cast<std::size_t>(r)];
    if (pa >= action_count_) throw ConfigError("qnet: prev_action out of range");
    if (pa >= 0) extras.at(r, num_mixtures_ + pa) = 1.0f;
    extras.at(r, num_mixtures_ + action_count_) = (*in.prev_r_int)[static_cast<std::size_t>(r)];
    extras.at(r, num_mixtures_ + action_count_ + 1) = (*in.prev_r_ext)[static_cast<std::size_t>(r)];
  }
  return extras;
}

int QNetwork::forward_step(Graph& g, const StepInput& in, const Network::StateNodes* state_in,
                           Network::StateNodes* state_out) const {
  if (in.obs == nullptr || in.mixture == nullptr || in.prev_action == nullptr ||
      in.prev_r_int == nullptr || in.prev_r_ext == nullptr)
    throw UsageError("qnet: incomplete step input");
  const int rows = in.obs->rows();
  const int features = torso_.forward(g, Network::Input{.cat = in.obs});
  const std::array<int, 2> parts{features, g.leaf(build_extras(in, rows))};
  const int joined = g.concat_cols(parts);
  const int hidden = gru_.forward(g, joined, state_in, state_out);
  const int v = value_head_.forward(g, hidden);
  const int a = advantage_head_.forward(g, hidden);
  return g.dueling(v, a);
}

Tensor QNetwork::apply_step(const StepInput& in, Tensor& hidden) const {
  Graph g;
  Network::StateNodes sin{{g.leaf(hidden)}};
  Network::StateNodes sout;
  const int q = forward_step(g, in, &sin, &sout);
  hidden = g.value(sout.h.at(0));
  return g.value(q);
}

std::vector<NamedParam> QNetwork::params() {
  std::vector<NamedParam> out = torso_.params();
  for (NamedParam& p : gru_.params()) out.push_back(p);
  for (NamedParam& p : value_head_.params()) out.push_back(p);
  for (NamedParam& p : advantage_head_.params()) out.push_back(p);
  return out;
}

std::vector<NamedParamConst> QNetwork::params() const {
  std::vector<NamedParamConst> out = torso_.params();
  for (const NamedParamConst& p : gru_.params()) out.push_back(p);
  for (const NamedParamConst& p : value_head_.params()) out.push_back(p);
  for (const NamedParamConst& p : advantage_head_.params()) out.push_back(p);
  return out;
}

void QNetwork::copy_params_from(const QNetwork& other) {
  torso_.copy_params_from(other.torso_);
  gru_.copy_params_from(other.gru_);
  value_head_.copy_params_from(other.value_head_);
  advantage_head_.copy_params_from(other.advantage_head_);
}

ActResult act(const QNetwork& net, const CatBatch& obs, int prev_action, float prev_r_int,
              float prev_r_ext, int mixture, Tensor& hidden, double epsilon, Rng& rng) {
  const std::vector<int> mix{mixture};
  const std::vector<int> pa{prev_action};
  const std::vector<float> ri{prev_r_int};
  const std::vector<float> re{prev_r_ext};
  const QNetwork::StepInput in{.obs = &obs,
                               .mixture = &mix,
                               .prev_action = &pa,
                               .prev_r_int = &ri,
                               .prev_r_ext = &re};
  const Tensor q = net.apply_step(in, hidden);
  int best = 0;
  for (int a = 1; a < net.action_count(); ++a)
    if (q.at(0, a) > q.at(0, best)) best = a;

  const int n = net.action_count();
  ActResult out;
  if (epsilon > 0.0 && rng.uniform() < epsilon) {
    out.action = rng.uniform_int(n);
  } else {
    out.action = best;
  }
  out.mu_prob = out.action == best ? 1.0 - epsilon + epsilon / n : epsilon / n;
  return out;
}

}  // namespace neverup
