#pragma once

#include <cstdint>
#include <vector>

namespace neverup {

// Minimal episodic environment with categorical observations: `obs_cells`
// slots, each a category in [0, obs_channels). One instance per actor.
class Env {
 public:
  virtual ~Env() = default;

  virtual int obs_cells() const = 0;
  virtual int obs_channels() const = 0;
  virtual int action_count() const = 0;

  virtual void reset() = 0;
  // Advances one step; returns the extrinsic reward. Stepping a finished
  // episode is a usage error.
  virtual double step(int action) = 0;
  virtual bool done() const = 0;
  virtual const std::vector<std::uint8_t>& obs() const = 0;

  // Distinct-agent-position accounting for coverage curves; environments
  // without a position notion report 0.
  virtual int unique_states() const { return 0; }
  virtual double coverage() const { return 0.0; }
};

}  // namespace neverup
