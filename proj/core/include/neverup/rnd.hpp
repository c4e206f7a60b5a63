#pragma once

#include <vector>

#include "neverup/network.hpp"

namespace neverup {

// Streaming mean/variance (Welford). Feeds the prediction-error normalization.
struct RunningStats {
  std::int64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }
  double variance() const { return count < 2 ? 0.0 : m2 / static_cast<double>(count - 1); }
  double stddev() const;
};

struct RndConfig {
  int output_dim = 32;  // k_rnd
  int hidden = 64;
};

// Random Network Distillation: frozen random target g, trained predictor
// g_hat; the squared prediction gap is the life-long novelty signal.
class RndModel {
 public:
  RndModel(int obs_cells, int obs_channels, const RndConfig& cfg, Rng& rng);
  RndModel(int obs_dim, const RndConfig& cfg, Rng& rng);

  const RndConfig& config() const { return cfg_; }
  Network& target() { return g_; }
  const Network& target() const { return g_; }
  Network& predictor() { return g_hat_; }
  const Network& predictor() const { return g_hat_; }

  // err(x) = ||g_hat(x) - g(x)||^2 per row.
  std::vector<double> errors(const Network::Input& obs) const;
  double error(const CatBatch& obs) const;
  double error(const Tensor& obs) const;

  // Mean prediction error over the batch; the target branch contributes no
  // gradient (its values enter as a leaf).
  int build_predictor_loss(Graph& g, const Network::Input& obs,
                           const std::vector<float>& mask = {}) const;

  // Only the predictor trains; g stays frozen.
  std::vector<NamedParam> trainable_params() { return g_hat_.params(); }
  std::vector<NamedParam> all_params();
  std::vector<NamedParamConst> all_params() const;

 private:
  RndConfig cfg_;
  Network g_;
  Network g_hat_;
};

// Life-long modulator alpha = 1 + (err - mean)/std using already-updated
// stats; neutral (1.0) until the stream has usable statistics.
double rnd_alpha(const RunningStats& stats, double err);

}  // namespace neverup
