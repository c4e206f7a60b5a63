#include "neverup/combiner.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "neverup/errors.hpp"

namespace neverup {

void CombinerConfig::validate() const {
  if (clip_ceiling < 1.0) throw ConfigError("combiner: clip ceiling L must be >= 1");
  if (cross_mixture_ratio < 0.0 || cross_mixture_ratio > 1.0)
    throw ConfigError("combiner: cross mixture ratio must be in [0,1]");
}

double intrinsic_reward(double r_episodic, double alpha, const CombinerConfig& cfg) {
  if (!cfg.use_rnd) return r_episodic;
  const double modulator = std::min(std::max(alpha, 1.0), cfg.clip_ceiling);
  return r_episodic * modulator;
}

double augmented_reward(double r_ext, double r_int, double beta) {
  return r_ext + beta * r_int;
}

MixtureSchedule make_schedule(int n, double beta_max, double gamma_max, double gamma_min) {
  if (n < 1) throw ConfigError("make_schedule: N must be >= 1");
  if (gamma_max >= 1.0 || gamma_min >= 1.0 || gamma_max <= 0.0 || gamma_min <= 0.0)
    throw ConfigError("make_schedule: discounts must be in (0,1)");
  if (gamma_min > gamma_max)
    throw ConfigError("make_schedule: gamma_min must not exceed gamma_max");

  MixtureSchedule s;
  s.betas.resize(static_cast<std::size_t>(n));
  s.gammas.resize(static_cast<std::size_t>(n));

  if (n == 1) {
    // Single exploratory policy: full beta, lowest discount.
    s.betas[0] = beta_max;
    s.gammas[0] = gamma_min;
    return s;
  }

  for (int i = 0; i < n; ++i) {
    double b;
    if (i == 0) {
      b = 0.0;
    } else if (i == n - 1) {
      b = beta_max;
    } else {
      const double t = 10.0 * (2.0 * i - (n - 2)) / (n - 2);
      b = beta_max / (1.0 + std::exp(-t));
    }
    s.betas[static_cast<std::size_t>(i)] = b;

    const double log1mg = ((n - 1 - i) * std::log(1.0 - gamma_max) +
                           i * std::log(1.0 - gamma_min)) /
                          (n - 1);
    s.gammas[static_cast<std::size_t>(i)] = 1.0 - std::exp(log1mg);
  }
  // Pin the endpoints exactly (the closed form reproduces them only up to
  // floating-point rounding).
  s.gammas.front() = gamma_max;
  s.gammas.back() = gamma_min;
  return s;
}

std::string MixtureSchedule::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "i,beta,gamma\n";
  for (int i = 0; i < size(); ++i)
    os << i << "," << betas[static_cast<std::size_t>(i)] << ","
       << gammas[static_cast<std::size_t>(i)] << "\n";
  return os.str();
}

void MixtureSchedule::dump_csv(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("schedule: cannot open " + path);
  os << to_csv();
}

int actor_mixture(int actor_index, int n, bool literal_mod_n_minus_1) {
  if (n < 1) throw ConfigError("actor_mixture: N must be >= 1");
  if (n == 1) return 0;
  if (literal_mod_n_minus_1) return actor_index % (n - 1);
  return actor_index % n;
}

}  // namespace neverup
