#pragma once

#include <string>
#include <vector>

namespace neverup {

// The N (beta_i, gamma_i) pairs shared by actors, learner, and evaluator.
struct MixtureSchedule {
  std::vector<double> betas;
  std::vector<double> gammas;

  int size() const { return static_cast<int>(betas.size()); }
  double beta(int i) const { return betas.at(static_cast<std::size_t>(i)); }
  double gamma(int i) const { return gammas.at(static_cast<std::size_t>(i)); }

  void dump_csv(const std::string& path) const;
  std::string to_csv() const;
};

struct CombinerConfig {
  double clip_ceiling = 5.0;  // L
  bool use_rnd = true;
  double cross_mixture_ratio = 0.0;  // CMR, consumed by the replay sampler

  void validate() const;
};

// r^i = r_episodic * clamp(alpha, 1, L); plain episodic reward when the
// life-long modulator is disabled.
double intrinsic_reward(double r_episodic, double alpha, const CombinerConfig& cfg);

// r^beta = r_ext + beta * r_int.
double augmented_reward(double r_ext, double r_int, double beta);

// Sigmoid-bunched betas (endpoints pinned at 0 and beta_max) and discounts
// log-evenly spaced between gamma_max and gamma_min. N=1 is the
// single-exploratory-policy special case: {beta_max}, {gamma_min}.
MixtureSchedule make_schedule(int n, double beta_max, double gamma_max, double gamma_min);

// Mixture index for actor j. The literal published assignment is
// j mod (N-1), which can never select the most exploratory mixture; the
// default here covers all N and the literal form stays available.
int actor_mixture(int actor_index, int n, bool literal_mod_n_minus_1 = false);

}  // namespace neverup
