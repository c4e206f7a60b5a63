#pragma once

#include <string>
#include <vector>

#include "neverup/actor.hpp"
#include "neverup/config.hpp"
#include "neverup/learner.hpp"

namespace neverup {

struct ExperimentSummary {
  std::int64_t frames = 0;
  std::int64_t learner_steps = 0;
  std::int64_t episodes = 0;
  std::vector<EpisodeRecord> eval_records;  // in evaluation order
  std::string metrics_path;
  std::string checkpoint_path;
};

// Coordinates actors, learner, and evaluator until the frame budget is
// reached, writing metrics.csv, schedule.csv, config.resolved, and parameter
// checkpoints under `out_dir`. The serial driver interleaves workers
// deterministically; the threaded driver runs them concurrently and shares
// only the replay buffer and the snapshot mailbox.
ExperimentSummary run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                                 std::uint64_t seed);

// Loads a checkpoint produced by run_experiment and runs greedy evaluation
// episodes with the given mixture index.
std::vector<EpisodeRecord> evaluate_checkpoint(const ExperimentConfig& cfg,
                                               const std::string& checkpoint_path,
                                               int beta_index, int episodes, std::uint64_t seed);

}  // namespace neverup
