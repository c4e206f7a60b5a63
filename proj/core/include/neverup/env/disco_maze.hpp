#pragma once

#include <string>

#include "neverup/env/env.hpp"
#include "neverup/rng.hpp"

namespace neverup {

struct DiscoMazeConfig {
  int size = 21;    // odd lattice size
  int colors = 5;   // wall palette
  int time_limit = 500;
  bool randomize_colors = true;  // resample every wall color each step

  void validate() const;
};

// Procedurally generated maze, rebuilt on every reset. The agent moves one
// cell per step; stepping into a wall ends the episode; every step resamples
// all wall colors, so the observation stream stays novel forever while the
// position dynamics are deterministic. Extrinsic reward is always 0.
//
// Cell categories: 0 corridor, 1 agent, 2..colors+1 wall colors.
class DiscoMaze : public Env {
 public:
  DiscoMaze(const DiscoMazeConfig& cfg, std::uint64_t seed);

  int obs_cells() const override { return cfg_.size * cfg_.size; }
  int obs_channels() const override { return 2 + cfg_.colors; }
  int action_count() const override { return 4; }  // left, right, up, down

  void reset() override;
  double step(int action) override;
  bool done() const override { return done_; }
  const std::vector<std::uint8_t>& obs() const override { return obs_; }

  int unique_states() const override;
  double coverage() const override;

  // layout queries
  bool is_wall(int x, int y) const;
  int reachable_corridors() const { return corridor_count_; }
  int agent_x() const { return ax_; }
  int agent_y() const { return ay_; }
  int steps_taken() const { return static_cast<int>(trace_.size()); }

  std::string render_ascii() const;
  // step,x,y,action,done rows for the current episode
  void dump_trace_csv(const std::string& path) const;

  // Observation encoding round-trip support: category grid -> (walls, colors,
  // agent) and back.
  struct Grid {
    int size = 0;
    std::vector<std::uint8_t> wall;   // 0/1 per cell
    std::vector<std::uint8_t> color;  // palette index per wall cell
    int agent_x = -1, agent_y = -1;
  };
  static std::vector<std::uint8_t> encode(const Grid& grid);
  static Grid decode(const std::vector<std::uint8_t>& obs, int size);

 private:
  struct TraceRow {
    int step, x, y, action;
    bool done;
  };
  void generate_maze();
  void paint();

  DiscoMazeConfig cfg_;
  Rng rng_;
  std::vector<std::uint8_t> wall_;   // size*size
  std::vector<std::uint8_t> color_;  // size*size, valid on wall cells
  std::vector<std::uint8_t> visited_;
  std::vector<std::uint8_t> obs_;
  std::vector<TraceRow> trace_;
  int corridor_count_ = 0;
  int unique_visited_ = 0;
  int ax_ = 1, ay_ = 1;
  bool done_ = true;
};

// Distinct positions in a trace of (x, y) pairs divided by the reachable
// corridor count.
double unique_state_coverage(const std::vector<std::pair<int, int>>& positions,
                             int reachable_corridors);

}  // namespace neverup
