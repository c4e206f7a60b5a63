#pragma once

#include <optional>
#include <unordered_map>

#include "neverup/network.hpp"

namespace neverup {

struct AdamConfig {
  float learning_rate = 1e-4f;  // 5e-4 for the auxiliary (embedding/RND) losses
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-4f;
  std::optional<float> clip_norm = 40.0f;  // global gradient norm ceiling

  void validate() const;
};

// Adam with global-norm clipping applied before the moment update.
class AdamOpt {
 public:
  explicit AdamOpt(AdamConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  // Applies one update. Gradient names must match parameter names one-to-one.
  // Throws NumericError naming the parameter if a gradient is not finite.
  void step(std::vector<NamedParam> params, const std::vector<GradEntry>& grads);

  const AdamConfig& config() const { return cfg_; }
  std::int64_t steps_taken() const { return t_; }

 private:
  struct Moments {
    Tensor m, v;
  };
  AdamConfig cfg_;
  std::unordered_map<std::string, Moments> moments_;
  std::int64_t t_ = 0;
};

}  // namespace neverup
