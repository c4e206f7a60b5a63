#include "neverup/embedding.hpp"

#include <array>

#include "neverup/errors.hpp"

namespace neverup {

Network EmbeddingModel::make_f(int obs_cells, int obs_channels, int obs_dim,
                               const EmbeddingConfig& cfg) {
  Network f = obs_cells > 0 ? Network(obs_cells, obs_channels, "f") : Network(obs_dim, "f");
  f.dense(cfg.f_hidden).relu().dense(cfg.embedding_dim);
  return f;
}

EmbeddingModel::EmbeddingModel(int obs_cells, int obs_channels, int action_count,
                               const EmbeddingConfig& cfg, Rng& rng)
    : cfg_(cfg),
      action_count_(action_count),
      f_(make_f(obs_cells, obs_channels, 0, cfg)),
      h_(Network(2 * cfg.embedding_dim, "h")) {
  if (action_count < 1) throw ConfigError("embedding: action_count must be positive");
  h_.dense(cfg.h_hidden).relu().dense(action_count);
  f_.init(rng);
  h_.init(rng);
}

EmbeddingModel::EmbeddingModel(int obs_dim, int action_count, const EmbeddingConfig& cfg,
                               Rng& rng)
    : cfg_(cfg),
      action_count_(action_count),
      f_(make_f(0, 0, obs_dim, cfg)),
      h_(Network(2 * cfg.embedding_dim, "h")) {
  if (action_count < 1) throw ConfigError("embedding: action_count must be positive");
  h_.dense(cfg.h_hidden).relu().dense(action_count);
  f_.init(rng);
  h_.init(rng);
}

Tensor EmbeddingModel::action_probs(const Network::Input& x_t, const Network::Input& x_t1) const {
  Graph g;
  const int e_t = f_.forward(g, x_t);
  const int e_t1 = f_.forward(g, x_t1);
  const std::array<int, 2> parts{e_t, e_t1};
  const int logits = h_.forward(g, g.concat_cols(parts));
  return g.value(g.softmax_rows(logits));
}

int EmbeddingModel::build_loss(Graph& g, const Network::Input& x_t, const Network::Input& x_t1,
                               std::vector<int> actions, std::vector<float> mask) const {
  const int e_t = f_.forward(g, x_t);
  const int e_t1 = f_.forward(g, x_t1);
  const std::array<int, 2> parts{e_t, e_t1};
  const int logits = h_.forward(g, g.concat_cols(parts));
  int loss = g.softmax_xent_mean(logits, std::move(actions), std::move(mask));
  if (cfg_.l2_weight > 0.0f) {
    int reg = -1;
    for (const NamedParamConst& p : all_params()) {
      const int s = g.sum_squares(g.param(const_cast<Tensor*>(p.tensor)));
      reg = reg < 0 ? s : g.add(reg, s);
    }
    loss = g.add(loss, g.scale_add(reg, cfg_.l2_weight, 0.0f));
  }
  return loss;
}

double EmbeddingModel::inverse_dynamics_loss(const CatBatch& x_t, int action,
                                             const CatBatch& x_t1) const {
  if (action < 0 || action >= action_count_)
    throw ConfigError("inverse_dynamics_loss: action out of range");
  Graph g;
  const int loss = build_loss(g, Network::Input{.cat = &x_t}, Network::Input{.cat = &x_t1},
                              {action});
  return g.value(loss).v[0];
}

double EmbeddingModel::inverse_dynamics_loss(const Tensor& x_t, int action,
                                             const Tensor& x_t1) const {
  if (action < 0 || action >= action_count_)
    throw ConfigError("inverse_dynamics_loss: action out of range");
  Graph g;
  const int loss = build_loss(g, Network::Input{.dense = &x_t}, Network::Input{.dense = &x_t1},
                              {action});
  return g.value(loss).v[0];
}

std::vector<NamedParam> EmbeddingModel::trainable_params() {
  if (cfg_.random_projection) return {};
  return all_params();
}

std::vector<NamedParam> EmbeddingModel::all_params() {
  std::vector<NamedParam> out = f_.params();
  for (NamedParam& p : h_.params()) out.push_back(p);
  return out;
}

std::vector<NamedParamConst> EmbeddingModel::all_params() const {
  std::vector<NamedParamConst> out = f_.params();
  for (const NamedParamConst& p : h_.params()) out.push_back(p);
  return out;
}

}  // namespace neverup
