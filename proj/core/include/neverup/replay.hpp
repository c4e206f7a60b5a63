#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <vector>

#include "neverup/rng.hpp"
#include "neverup/tensor.hpp"

namespace neverup {

// One stored replay trace: up to `length` consecutive transitions from a
// single episode (never crossing its boundary), the leading `overlap` steps
// shared with the previous trace, plus everything needed to rebuild the
// network inputs at its first step.
struct SequenceSample {
  int beta_index = 0;  // originating mixture
  int length = 80;     // nominal trace length
  int overlap = 0;     // leading steps shared with the adjacent sequence
  int valid_len = 0;   // stored transitions (< length only at episode end)
  bool terminal = false;

  int obs_cells = 0;
  std::vector<std::uint8_t> obs;        // valid_len * obs_cells
  std::vector<std::uint8_t> final_obs;  // state after the last transition (empty if terminal)
  std::vector<int> actions;             // valid_len
  std::vector<float> r_ext;             // reward returned by env.step(action)
  std::vector<float> r_int;             // intrinsic reward of the arrived-at state
  std::vector<float> r_aug;             // r_ext + beta(origin) * r_int
  std::vector<float> mu;                // behavior probability of the taken action

  Tensor initial_state;  // 1 x H recurrent state at the sequence start
  int prev_action0 = -1;  // network inputs for the first step
  float prev_r_int0 = 0.0f;
  float prev_r_ext0 = 0.0f;

  float priority = 1.0f;

  // bookkeeping for accounting tests and diagnostics
  int actor_id = 0;
  std::int64_t episode_id = 0;
  std::int64_t start_step = 0;

  const std::uint8_t* obs_row(int t) const {
    return obs.data() + static_cast<std::size_t>(t) * obs_cells;
  }
  void check() const;  // structural integrity (lengths, priority > 0)
};

// Many-producer single-consumer prioritized FIFO of sequences. Sampling
// probability of a slot is proportional to priority^eta; eviction is oldest
// first. Insert/sample/update are linearizable (single mutex).
class ReplayBuffer {
 public:
  ReplayBuffer(int capacity, double priority_exponent, int min_start);

  void insert(SequenceSample s);

  int size() const;
  std::int64_t total_inserted() const;
  bool ready() const;
  double max_priority() const;
  double priority_exponent() const { return eta_; }

  // Slot + generation; stale tickets (evicted slots) are ignored on update.
  struct Ticket {
    int slot;
    std::uint64_t generation;
  };
  struct Batch {
    std::vector<SequenceSample> sequences;  // copies; safe outside the lock
    std::vector<Ticket> tickets;
  };

  // Draws `batch` sequences by priority; empty optional while underfull.
  std::optional<Batch> sample(int batch, Rng& rng);
  void update_priorities(const std::vector<Ticket>& tickets,
                         const std::vector<float>& priorities);

  // Runs `fn` on every stored sequence under the lock (test/diagnostic scans).
  void for_each(const std::function<void(const SequenceSample&)>& fn) const;

  static constexpr float kPriorityFloor = 1e-6f;

 private:
  void tree_set(int slot, double weight);
  int tree_sample(double u) const;

  mutable std::mutex mu_;
  int capacity_;
  double eta_;
  int min_start_;
  int tree_width_;  // capacity rounded up to a power of two
  int next_slot_ = 0;
  int size_ = 0;
  std::int64_t inserted_ = 0;
  double max_priority_ = 1.0;
  std::vector<SequenceSample> slots_;
  std::vector<std::uint64_t> generation_;
  std::vector<double> tree_;  // segment tree over priority^eta
};

}  // namespace neverup
