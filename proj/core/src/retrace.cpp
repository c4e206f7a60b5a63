#include "neverup/retrace.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "neverup/errors.hpp"

namespace neverup {

void RetraceConfig::validate() const {
  if (lambda <= 0.0 || lambda > 1.0) throw ConfigError("retrace: lambda must be in (0,1]");
  if (h_epsilon <= 0.0) throw ConfigError("retrace: h_epsilon must be positive");
  if (target_epsilon < 0.0 || target_epsilon > 1.0)
    throw ConfigError("retrace: target_epsilon must be in [0,1]");
}

double squash(double z, double eps) {
  const double s = z < 0.0 ? -1.0 : 1.0;
  return s * (std::sqrt(std::abs(z) + 1.0) - 1.0) + eps * z;
}

double unsquash(double z, double eps) {
  const double s = z < 0.0 ? -1.0 : 1.0;
  const double u = (std::sqrt(1.0 + 4.0 * eps * (std::abs(z) + 1.0 + eps)) - 1.0) / (2.0 * eps);
  return s * (u * u - 1.0);
}

namespace {

// epsilon-greedy probability of `action` given the row of Q values its argmax
// comes from.
double eps_greedy_prob(const std::vector<float>& q_row, int action, double eps) {
  int best = 0;
  for (int a = 1; a < static_cast<int>(q_row.size()); ++a)
    if (q_row[static_cast<std::size_t>(a)] > q_row[static_cast<std::size_t>(best)]) best = a;
  const double base = eps / static_cast<double>(q_row.size());
  return action == best ? 1.0 - eps + base : base;
}

}  // namespace

std::vector<double> retrace_targets(const RetraceInputs& in, const RetraceConfig& cfg) {
  cfg.validate();
  const int T = static_cast<int>(in.actions.size());
  if (T == 0) return {};
  if (static_cast<int>(in.rewards.size()) != T || static_cast<int>(in.mu.size()) != T)
    throw ConfigError("retrace_targets: rewards/mu length mismatch");
  if (static_cast<int>(in.q_target.size()) != T + 1 ||
      static_cast<int>(in.q_online.size()) != T + 1)
    throw ConfigError("retrace_targets: need T+1 value rows");
  const int A = static_cast<int>(in.q_target[0].size());
  const double heps = cfg.h_epsilon;

  auto inv = [&](float q) {
    return cfg.use_squash ? unsquash(static_cast<double>(q), heps) : static_cast<double>(q);
  };
  auto fwd = [&](double y) { return cfg.use_squash ? squash(y, heps) : y; };

  // Unsquashed taken-action values, expected target-policy values, and trace
  // coefficients per step.
  std::vector<double> q_taken(static_cast<std::size_t>(T));
  std::vector<double> v_next(static_cast<std::size_t>(T));
  std::vector<double> trace(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const int a_t = in.actions[static_cast<std::size_t>(t)];
    if (a_t < 0 || a_t >= A) throw ConfigError("retrace_targets: action out of range");
    const double mu_t = in.mu[static_cast<std::size_t>(t)];
    if (mu_t <= 0.0)
      throw DataError("retrace_targets: stored behavior probability is not positive at step " +
                      std::to_string(t));
    q_taken[static_cast<std::size_t>(t)] = inv(in.q_target[static_cast<std::size_t>(t)][static_cast<std::size_t>(a_t)]);

    const auto& policy_row =
        cfg.double_q ? in.q_online[static_cast<std::size_t>(t)] : in.q_target[static_cast<std::size_t>(t)];
    const double pi_t = eps_greedy_prob(policy_row, a_t, cfg.target_epsilon);
    trace[static_cast<std::size_t>(t)] = cfg.lambda * std::min(1.0, pi_t / mu_t);

    if (t == T - 1 && in.terminal) {
      v_next[static_cast<std::size_t>(t)] = 0.0;
    } else {
      const auto& next_policy_row =
          cfg.double_q ? in.q_online[static_cast<std::size_t>(t) + 1] : in.q_target[static_cast<std::size_t>(t) + 1];
      int best = 0;
      for (int a = 1; a < A; ++a)
        if (next_policy_row[static_cast<std::size_t>(a)] > next_policy_row[static_cast<std::size_t>(best)]) best = a;
      double v = 0.0;
      for (int a = 0; a < A; ++a) {
        const double pi = a == best ? 1.0 - cfg.target_epsilon + cfg.target_epsilon / A
                                    : cfg.target_epsilon / A;
        v += pi * inv(in.q_target[static_cast<std::size_t>(t) + 1][static_cast<std::size_t>(a)]);
      }
      v_next[static_cast<std::size_t>(t)] = v;
    }
  }

  // G_t = delta_t + gamma * c_{t+1} * G_{t+1}, backwards.
  std::vector<double> targets(static_cast<std::size_t>(T));
  double g_accum = 0.0;
  for (int t = T - 1; t >= 0; --t) {
    const double delta = in.rewards[static_cast<std::size_t>(t)] + in.gamma * v_next[static_cast<std::size_t>(t)] -
                         q_taken[static_cast<std::size_t>(t)];
    if (t == T - 1)
      g_accum = delta;
    else
      g_accum = delta + in.gamma * trace[static_cast<std::size_t>(t) + 1] * g_accum;
    targets[static_cast<std::size_t>(t)] = fwd(q_taken[static_cast<std::size_t>(t)] + g_accum);
  }
  return targets;
}

std::vector<double> retrace_operator(const TabularMDP& mdp, const std::vector<double>& q,
                                     const std::vector<double>& pi,
                                     const std::vector<double>& mu, double lambda) {
  mdp.validate();
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const int n = S * A;
  if (static_cast<int>(q.size()) != n || static_cast<int>(pi.size()) != n ||
      static_cast<int>(mu.size()) != n)
    throw ConfigError("retrace_operator: table size mismatch");
  const double gamma = mdp.discount;

  // delta(s,a) = r + gamma * E_{s'}[ sum_a' pi(a'|s') Q(s',a') ] - Q(s,a)
  Eigen::VectorXd delta(n);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      double exp_v = 0.0;
      for (int s2 = 0; s2 < S; ++s2) {
        double v = 0.0;
        for (int a2 = 0; a2 < A; ++a2)
          v += pi[static_cast<std::size_t>(s2) * A + a2] * q[static_cast<std::size_t>(s2) * A + a2];
        exp_v += mdp.p(s, a, s2) * v;
      }
      delta(s * A + a) = mdp.r(s, a) + gamma * exp_v - q[static_cast<std::size_t>(s) * A + a];
    }

  // E = delta + gamma * B E with B[(s,a),(s',a')] = P(s'|s,a) mu(a'|s') c(s',a'),
  // c = lambda * min(1, pi/mu). Solved exactly.
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n, n);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      for (int s2 = 0; s2 < S; ++s2)
        for (int a2 = 0; a2 < A; ++a2) {
          const double mu_p = mu[static_cast<std::size_t>(s2) * A + a2];
          if (mu_p <= 0.0) continue;
          const double c = lambda * std::min(1.0, pi[static_cast<std::size_t>(s2) * A + a2] / mu_p);
          lhs(s * A + a, s2 * A + a2) -= gamma * mdp.p(s, a, s2) * mu_p * c;
        }
  Eigen::VectorXd e = lhs.partialPivLu().solve(delta);

  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = q[static_cast<std::size_t>(i)] + e(i);
  return out;
}

}  // namespace neverup
