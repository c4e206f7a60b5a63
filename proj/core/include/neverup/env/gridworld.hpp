#pragma once

#include "neverup/env/env.hpp"
#include "neverup/rng.hpp"

namespace neverup {

struct GridworldConfig {
  int size = 11;        // odd, border is wall
  int colors = 5;
  int time_limit = 200;
  bool randomize_colors = true;  // distractor churn on the border walls

  void validate() const;
};

// Deterministic open room: border cells are walls, the interior is free.
// Bumping a wall leaves the agent in place (the episode continues), so the
// position dynamics are fully deterministic; wall colors may churn as a
// distractor. Used as the inverse-dynamics training ground.
// Same cell categories as the maze: 0 corridor, 1 agent, 2.. wall colors.
class Gridworld : public Env {
 public:
  Gridworld(const GridworldConfig& cfg, std::uint64_t seed);

  int obs_cells() const override { return cfg_.size * cfg_.size; }
  int obs_channels() const override { return 2 + cfg_.colors; }
  int action_count() const override { return 4; }

  void reset() override;
  double step(int action) override;
  bool done() const override { return done_; }
  const std::vector<std::uint8_t>& obs() const override { return obs_; }

  int unique_states() const override { return unique_visited_; }
  double coverage() const override;

  int agent_x() const { return ax_; }
  int agent_y() const { return ay_; }

  // Observation for an arbitrary agent position and wall coloring (test
  // construction; `colors` must cover the border cells).
  std::vector<std::uint8_t> observation_for(int x, int y,
                                            const std::vector<std::uint8_t>& border_colors) const;
  int border_cell_count() const;

 private:
  void paint();
  GridworldConfig cfg_;
  Rng rng_;
  std::vector<std::uint8_t> color_;
  std::vector<std::uint8_t> visited_;
  std::vector<std::uint8_t> obs_;
  int steps_ = 0;
  int unique_visited_ = 0;
  int ax_ = 1, ay_ = 1;
  bool done_ = true;
};

}  // namespace neverup
