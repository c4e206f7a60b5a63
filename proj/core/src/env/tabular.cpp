#include "neverup/env/tabular.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "neverup/errors.hpp"

namespace neverup {

void TabularMDP::validate() const {
  if (num_states < 1 || num_actions < 1) throw ConfigError("tabular MDP: empty state/action set");
  if (static_cast<int>(transition.size()) != num_states * num_actions * num_states)
    throw ConfigError("tabular MDP: transition tensor size mismatch");
  if (static_cast<int>(reward.size()) != num_states * num_actions)
    throw ConfigError("tabular MDP: reward table size mismatch");
  if (static_cast<int>(terminal.size()) != num_states)
    throw ConfigError("tabular MDP: terminal flags size mismatch");
  for (int s = 0; s < num_states; ++s)
    for (int a = 0; a < num_actions; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < num_states; ++s2) sum += p(s, a, s2);
      if (std::abs(sum - 1.0) > 1e-12)
        throw ConfigError("tabular MDP: P row (" + std::to_string(s) + "," + std::to_string(a) +
                          ") sums to " + std::to_string(sum));
    }
}

TabularMDP make_chain_mdp(int num_states, double discount) {
  if (num_states < 2) throw ConfigError("chain MDP needs at least 2 states");
  TabularMDP m;
  m.num_states = num_states;
  m.num_actions = 2;
  m.discount = discount;
  m.transition.assign(static_cast<std::size_t>(num_states) * 2 * num_states, 0.0);
  m.reward.assign(static_cast<std::size_t>(num_states) * 2, 0.0);
  m.terminal.assign(static_cast<std::size_t>(num_states), 0);
  m.terminal.back() = 1;
  const int goal = num_states - 1;
  auto set = [&](int s, int a, int s2) {
    m.transition[(static_cast<std::size_t>(s) * 2 + a) * num_states + s2] = 1.0;
  };
  for (int s = 0; s < num_states; ++s) {
    set(s, 0, std::max(s - 1, 0));
    set(s, 1, std::min(s + 1, goal));
  }
  m.reward[static_cast<std::size_t>(goal - 1) * 2 + 1] = 1.0;
  return m;
}

TabularMDP make_random_mdp(int num_states, int num_actions, double discount, Rng& rng) {
  TabularMDP m;
  m.num_states = num_states;
  m.num_actions = num_actions;
  m.discount = discount;
  m.transition.resize(static_cast<std::size_t>(num_states) * num_actions * num_states);
  m.reward.resize(static_cast<std::size_t>(num_states) * num_actions);
  m.terminal.assign(static_cast<std::size_t>(num_states), 0);
  for (int s = 0; s < num_states; ++s)
    for (int a = 0; a < num_actions; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < num_states; ++s2) {
        const double w = -std::log(1.0 - rng.uniform());  // Exp(1) draws
        m.transition[(static_cast<std::size_t>(s) * num_actions + a) * num_states + s2] = w;
        sum += w;
      }
      for (int s2 = 0; s2 < num_states; ++s2)
        m.transition[(static_cast<std::size_t>(s) * num_actions + a) * num_states + s2] /= sum;
      m.reward[static_cast<std::size_t>(s) * num_actions + a] = rng.uniform(-1.0, 1.0);
    }
  return m;
}

std::vector<double> solve_mdp(const TabularMDP& mdp, double tol) {
  mdp.validate();
  if (mdp.discount >= 1.0) throw ConfigError("solve_mdp: discount must be < 1");
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  std::vector<double> q(static_cast<std::size_t>(S) * A, 0.0);
  std::vector<double> next(q.size(), 0.0);
  for (int iter = 0; iter < 1000000; ++iter) {
    double resid = 0.0;
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        double v = mdp.r(s, a);
        if (!mdp.is_terminal(s)) {
          // value of s' is 0 when s' is terminal
          double exp_v = 0.0;
          for (int s2 = 0; s2 < S; ++s2) {
            if (mdp.is_terminal(s2)) continue;
            double best = q[static_cast<std::size_t>(s2) * A];
            for (int a2 = 1; a2 < A; ++a2)
              best = std::max(best, q[static_cast<std::size_t>(s2) * A + a2]);
            exp_v += mdp.p(s, a, s2) * best;
          }
          v += mdp.discount * exp_v;
        }
        next[static_cast<std::size_t>(s) * A + a] = v;
        resid = std::max(resid, std::abs(v - q[static_cast<std::size_t>(s) * A + a]));
      }
    q.swap(next);
    if (resid < tol) return q;
  }
  throw NumericError("solve_mdp: value iteration failed to converge");
}

std::vector<double> solve_policy_q(const TabularMDP& mdp, const std::vector<double>& pi) {
  mdp.validate();
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  if (static_cast<int>(pi.size()) != S * A) throw ConfigError("solve_policy_q: pi size mismatch");
  const int n = S * A;
  // Q = r + gamma * P Pi Q  solved as (I - gamma P Pi) Q = r.
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd rhs(n);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      const int row = s * A + a;
      rhs(row) = mdp.r(s, a);
      if (mdp.is_terminal(s)) continue;
      for (int s2 = 0; s2 < S; ++s2) {
        if (mdp.is_terminal(s2)) continue;
        for (int a2 = 0; a2 < A; ++a2)
          lhs(row, s2 * A + a2) -=
              mdp.discount * mdp.p(s, a, s2) * pi[static_cast<std::size_t>(s2) * A + a2];
      }
    }
  Eigen::VectorXd q = lhs.partialPivLu().solve(rhs);
  return {q.data(), q.data() + n};
}

TabularEnv::TabularEnv(TabularMDP mdp, int start_state, int time_limit, std::uint64_t seed)
    : mdp_(std::move(mdp)), start_(start_state), time_limit_(time_limit), rng_(seed) {
  mdp_.validate();
  if (start_state < 0 || start_state >= mdp_.num_states)
    throw ConfigError("tabular env: start state out of range");
  if (time_limit < 1) throw ConfigError("tabular env: time limit must be positive");
  obs_.assign(1, 0);
  reset();
}

void TabularEnv::reset() {
  state_ = start_;
  steps_ = 0;
  done_ = false;
  obs_[0] = static_cast<std::uint8_t>(state_);
}

double TabularEnv::step(int action) {
  if (done_) throw UsageError("tabular env: episode is over; call reset()");
  if (action < 0 || action >= mdp_.num_actions)
    throw UsageError("tabular env: action out of range");
  const double reward = mdp_.r(state_, action);
  double u = rng_.uniform();
  int next = mdp_.num_states - 1;
  for (int s2 = 0; s2 < mdp_.num_states; ++s2) {
    u -= mdp_.p(state_, action, s2);
    if (u < 0.0) {
      next = s2;
      break;
    }
  }
  state_ = next;
  ++steps_;
  if (mdp_.is_terminal(state_) || steps_ >= time_limit_) done_ = true;
  obs_[0] = static_cast<std::uint8_t>(state_);
  return reward;
}

double greedy_return(const TabularMDP& mdp, const std::vector<double>& q, int start, int horizon) {
  double total = 0.0;
  int s = start;
  for (int t = 0; t < horizon && !mdp.is_terminal(s); ++t) {
    int best = 0;
    for (int a = 1; a < mdp.num_actions; ++a)
      if (q[static_cast<std::size_t>(s) * mdp.num_actions + a] >
          q[static_cast<std::size_t>(s) * mdp.num_actions + best])
        best = a;
    total += mdp.r(s, best);
    // deterministic transition lookup
    int s_next = -1;
    for (int s2 = 0; s2 < mdp.num_states; ++s2)
      if (mdp.p(s, best, s2) == 1.0) {
        s_next = s2;
        break;
      }
    if (s_next < 0) throw UsageError("greedy_return: MDP is not deterministic");
    s = s_next;
  }
  return total;
}

}  // namespace neverup
