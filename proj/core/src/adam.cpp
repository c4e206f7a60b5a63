#include "neverup/adam.hpp"

#include <cmath>

#include "neverup/errors.hpp"

namespace neverup {

void AdamConfig::validate() const {
  if (learning_rate <= 0.0f) throw ConfigError("Adam: learning_rate must be positive");
  if (beta1 <= 0.0f || beta1 >= 1.0f) throw ConfigError("Adam: beta1 must be in (0,1)");
  if (beta2 <= 0.0f || beta2 >= 1.0f) throw ConfigError("Adam: beta2 must be in (0,1)");
  if (epsilon <= 0.0f) throw ConfigError("Adam: epsilon must be positive");
  if (clip_norm && *clip_norm <= 0.0f) throw ConfigError("Adam: clip_norm must be positive");
}

void AdamOpt::step(std::vector<NamedParam> params, const std::vector<GradEntry>& grads) {
  if (params.size() != grads.size())
    throw ConfigError("Adam: " + std::to_string(grads.size()) + " gradients for " +
                      std::to_string(params.size()) + " parameters");

  double sq_norm = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != grads[i].name)
      throw ConfigError("Adam: gradient '" + grads[i].name + "' does not match parameter '" +
                        params[i].name + "'");
    if (params[i].tensor->shape != grads[i].grad.shape)
      throw ConfigError("Adam: gradient shape mismatch for " + params[i].name);
    for (float g : grads[i].grad.v) {
      if (!std::isfinite(g))
        throw NumericError("Adam: non-finite gradient for parameter " + params[i].name);
      sq_norm += static_cast<double>(g) * g;
    }
  }

  float scale = 1.0f;
  if (cfg_.clip_norm) {
    const double norm = std::sqrt(sq_norm);
    if (norm > *cfg_.clip_norm) scale = static_cast<float>(*cfg_.clip_norm / norm);
  }

  ++t_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(cfg_.beta1), static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(static_cast<double>(cfg_.beta2), static_cast<double>(t_));

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& w = *params[i].tensor;
    auto [it, fresh] = moments_.try_emplace(params[i].name);
    if (fresh) {
      it->second.m = Tensor::zeros(w.shape);
      it->second.v = Tensor::zeros(w.shape);
    } else if (it->second.m.shape != w.shape) {
      throw ConfigError("Adam: moment shape mismatch for " + params[i].name);
    }
    Tensor& m = it->second.m;
    Tensor& v = it->second.v;
    for (int j = 0; j < w.size(); ++j) {
      const auto k = static_cast<std::size_t>(j);
      const float g = grads[i].grad.v[k] * scale;
      m.v[k] = cfg_.beta1 * m.v[k] + (1.0f - cfg_.beta1) * g;
      v.v[k] = cfg_.beta2 * v.v[k] + (1.0f - cfg_.beta2) * g * g;
      const double mh = m.v[k] / bc1;
      const double vh = v.v[k] / bc2;
      w.v[k] -= static_cast<float>(cfg_.learning_rate * mh / (std::sqrt(vh) + cfg_.epsilon));
    }
  }
}

}  // namespace neverup
