#pragma once

#include <vector>

#include "neverup/network.hpp"

namespace neverup {

struct EmbeddingConfig {
  int embedding_dim = 32;  // p
  int f_hidden = 64;
  int h_hidden = 64;
  float l2_weight = 1e-5f;
  // Ablation: f stays at its random initialization and is never trained.
  bool random_projection = false;
};

// Controllable-state embedding f plus the inverse-dynamics action classifier
// h (one hidden layer, softmax over actions). The two f branches of a
// transition share parameters, so gradients from h accumulate through both.
class EmbeddingModel {
 public:
  // Categorical observations (`cells` slots over `channels` categories).
  EmbeddingModel(int obs_cells, int obs_channels, int action_count,
                 const EmbeddingConfig& cfg, Rng& rng);
  // Dense float observations.
  EmbeddingModel(int obs_dim, int action_count, const EmbeddingConfig& cfg, Rng& rng);

  int embedding_dim() const { return cfg_.embedding_dim; }
  int action_count() const { return action_count_; }
  const EmbeddingConfig& config() const { return cfg_; }

  Network& f() { return f_; }
  const Network& f() const { return f_; }
  Network& h() { return h_; }
  const Network& h() const { return h_; }

  // Controllable state f(x); rows = batch.
  Tensor embed(const CatBatch& obs) const { return f_.apply(obs); }
  Tensor embed(const Tensor& obs) const { return f_.apply(obs); }

  // p(a | x_t, x_t1) = softmax(h(f(x_t), f(x_t1))), rows sum to 1.
  Tensor action_probs(const Network::Input& x_t, const Network::Input& x_t1) const;

  // Mean action NLL over the batch plus l2_weight * ||f,h params||^2.
  // `mask` (optional) selects which rows count. Returns the loss node.
  int build_loss(Graph& g, const Network::Input& x_t, const Network::Input& x_t1,
                 std::vector<int> actions, std::vector<float> mask = {}) const;

  // Single-transition convenience used by tests.
  double inverse_dynamics_loss(const CatBatch& x_t, int action, const CatBatch& x_t1) const;
  double inverse_dynamics_loss(const Tensor& x_t, int action, const Tensor& x_t1) const;

  // Parameters updated by the auxiliary loss; empty in random-projection mode.
  std::vector<NamedParam> trainable_params();
  std::vector<NamedParam> all_params();
  std::vector<NamedParamConst> all_params() const;

 private:
  static Network make_f(int obs_cells, int obs_channels, int obs_dim,
                        const EmbeddingConfig& cfg);
  EmbeddingConfig cfg_;
  int action_count_;
  Network f_;
  Network h_;
};

}  // namespace neverup
