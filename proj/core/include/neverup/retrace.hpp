#pragma once

#include <vector>

#include "neverup/env/tabular.hpp"

namespace neverup {

struct RetraceConfig {
  double lambda = 0.95;
  double h_epsilon = 1e-2;
  bool use_squash = true;        // identity transform when false
  bool double_q = true;          // target policy argmax from the online net
  double target_epsilon = 0.01;  // epsilon of the (epsilon-)greedy target policy

  void validate() const;
};

// Value squashing h(z) = sign(z)(sqrt(|z|+1)-1) + eps*z and its closed-form
// inverse.
double squash(double z, double eps = 1e-2);
double unsquash(double z, double eps = 1e-2);

// One replay sequence flattened to plain arrays. `q_target`/`q_online` hold
// the (squashed) network outputs for the T transition states plus the state
// after the last transition (ignored when `terminal`).
struct RetraceInputs {
  std::vector<std::vector<float>> q_target;  // (T+1) x A
  std::vector<std::vector<float>> q_online;  // (T+1) x A
  std::vector<int> actions;                  // T
  std::vector<double> rewards;               // T, augmented with the training beta
  std::vector<double> mu;                    // T, behavior probability of the taken action
  bool terminal = false;
  double gamma = 0.99;
};

// Per-step targets of the finite sampled transformed-Retrace estimator,
// squashed back into the network's output domain.
std::vector<double> retrace_targets(const RetraceInputs& in, const RetraceConfig& cfg);

// Expected (full-model) Retrace operator application T^{pi,mu}Q for tabular
// policy evaluation; pi and mu are stochastic policies indexed s*A + a.
std::vector<double> retrace_operator(const TabularMDP& mdp, const std::vector<double>& q,
                                     const std::vector<double>& pi,
                                     const std::vector<double>& mu, double lambda);

}  // namespace neverup
