#pragma once

#include <cstdint>
#include <vector>

#include "neverup/rng.hpp"

namespace neverup {

// Small explicit MDP used as an oracle substrate and as a toy environment.
// P and R are indexed (s*A + a)*S + s' and s*A + a; every P row sums to 1.
struct TabularMDP {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> transition;  // S*A*S, row-stochastic
  std::vector<double> reward;      // S*A
  std::vector<std::uint8_t> terminal;  // S (absorbing; episode ends on entry)
  double discount = 0.99;

  double p(int s, int a, int s2) const {
    return transition[(static_cast<std::size_t>(s) * num_actions + a) * num_states + s2];
  }
  double r(int s, int a) const {
    return reward[static_cast<std::size_t>(s) * num_actions + a];
  }
  bool is_terminal(int s) const { return terminal[static_cast<std::size_t>(s)] != 0; }

  void validate() const;
};

// Deterministic chain: actions {back, forward}; `forward` from the last
// non-terminal state reaches the goal (reward 1, terminal), everything else
// pays 0.
TabularMDP make_chain_mdp(int num_states, double discount);

// Random dense MDP with Dirichlet-ish rows and uniform rewards; no terminals.
TabularMDP make_random_mdp(int num_states, int num_actions, double discount, Rng& rng);

// Optimal Q via value iteration to the given sup-norm residual.
std::vector<double> solve_mdp(const TabularMDP& mdp, double tol = 1e-10);

// Q^pi for a fixed stochastic policy (pi indexed s*A + a) via exact linear
// solve. Terminal states have value 0.
std::vector<double> solve_policy_q(const TabularMDP& mdp, const std::vector<double>& pi);

// Greedy policy's undiscounted return from `start`, following the argmax of Q
// for at most `horizon` steps (deterministic MDPs only).
double greedy_return(const TabularMDP& mdp, const std::vector<double>& q, int start, int horizon);

}  // namespace neverup

#include "neverup/env/env.hpp"

namespace neverup {

// Episodic wrapper: one-hot state observation, fixed start state, terminal
// states and a step limit end the episode.
class TabularEnv : public Env {
 public:
  TabularEnv(TabularMDP mdp, int start_state, int time_limit, std::uint64_t seed);

  int obs_cells() const override { return 1; }
  int obs_channels() const override { return mdp_.num_states; }
  int action_count() const override { return mdp_.num_actions; }

  void reset() override;
  double step(int action) override;
  bool done() const override { return done_; }
  const std::vector<std::uint8_t>& obs() const override { return obs_; }

  int state() const { return state_; }
  const TabularMDP& mdp() const { return mdp_; }

 private:
  TabularMDP mdp_;
  int start_;
  int time_limit_;
  Rng rng_;
  int state_ = 0;
  int steps_ = 0;
  bool done_ = true;
  std::vector<std::uint8_t> obs_;
};

}  // namespace neverup
