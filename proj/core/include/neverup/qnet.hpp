#pragma once

#include <vector>

#include "neverup/network.hpp"

namespace neverup {

struct QNetConfig {
  int torso_hidden = 64;
  int gru_hidden = 64;
  int head_hidden = 64;
};

// Recurrent dueling Q-network conditioned on the reward mixture: the torso
// features are concatenated with a one-hot mixture index, one-hot previous
// action, and the previous intrinsic/extrinsic rewards, and fed to the
// recurrent cell; value and advantage heads combine as Q = V + A - mean(A).
class QNetwork {
 public:
  QNetwork(int obs_cells, int obs_channels, int action_count, int num_mixtures,
           const QNetConfig& cfg, Rng& rng);

  int action_count() const { return action_count_; }
  int num_mixtures() const { return num_mixtures_; }
  int gru_hidden() const { return cfg_.gru_hidden; }
  int obs_cells() const { return torso_.cells(); }
  int obs_channels() const { return torso_.channels(); }
  const QNetConfig& config() const { return cfg_; }

  // One timestep for a batch of rows. prev_action entries may be -1 (episode
  // start: the one-hot block is zero).
  struct StepInput {
    const CatBatch* obs = nullptr;
    const std::vector<int>* mixture = nullptr;
    const std::vector<int>* prev_action = nullptr;
    const std::vector<float>* prev_r_int = nullptr;
    const std::vector<float>* prev_r_ext = nullptr;
  };

  // Returns the Q-value node [B x A]; recurrent state flows via nodes.
  int forward_step(Graph& g, const StepInput& in, const Network::StateNodes* state_in,
                   Network::StateNodes* state_out) const;

  // Inference step: q values out, hidden state updated in place.
  Tensor apply_step(const StepInput& in, Tensor& hidden) const;

  Tensor initial_state(int batch = 1) const {
    return Tensor::zeros({batch, cfg_.gru_hidden});
  }

  std::vector<NamedParam> params();
  std::vector<NamedParamConst> params() const;
  void copy_params_from(const QNetwork& other);
  void init(Rng& rng);

 private:
  Tensor build_extras(const StepInput& in, int rows) const;

  QNetConfig cfg_;
  int action_count_;
  int num_mixtures_;
  Network torso_;
  Network gru_;
  Network value_head_;
  Network advantage_head_;
};

struct ActResult {
  int action = 0;
  double mu_prob = 1.0;  // behavior probability of the chosen action
};

// Epsilon-greedy over Q(., mixture); updates `hidden` and reports the
// behavior probability for replay storage.
ActResult act(const QNetwork& net, const CatBatch& obs, int prev_action, float prev_r_int,
              float prev_r_ext, int mixture, Tensor& hidden, double epsilon, Rng& rng);

}  // namespace neverup
