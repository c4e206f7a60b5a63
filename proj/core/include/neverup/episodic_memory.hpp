#pragma once

#include <string>
#include <vector>

#include "neverup/tensor.hpp"

namespace neverup {

// Inverse-kernel pseudo-count parameters.
struct KernelConfig {
  double epsilon = 1e-3;      // kernel epsilon
  int k = 10;                 // neighbors per query
  double c = 0.001;           // pseudo-count constant
  double xi = 0.008;          // cluster distance
  double sm = 8.0;            // maximum similarity
  bool zero_when_empty = false;  // reward for an empty memory: 0 instead of 1/c

  void validate() const;
};

// Ring buffer of controllable-state embeddings for one actor episode (or
// meta-episode), plus the running average of squared neighbor distances used
// to normalize the kernel. Single-writer, single-reader.
class EpisodicMemory {
 public:
  EpisodicMemory(int capacity, int dim);

  int capacity() const { return capacity_; }
  int dim() const { return dim_; }
  int size() const { return size_; }
  std::int64_t count_inserted() const { return count_inserted_; }

  // Oldest entry is evicted once the buffer is full.
  void insert(const float* embedding);
  void insert(const Tensor& embedding);

  // Slot access in insertion-age order (0 = oldest retained).
  const float* slot(int age_index) const;

  double distance_average() const { return dm2_; }
  // Test/diagnostic hook: pre-position the running distance average.
  void set_distance_average(double dm2) { dm2_ = dm2; }

  // Clears contents and the distance average (new (meta-)episode).
  void clear();

  // Debug dump: slot_index,e0,e1,... rows in age order.
  void dump_csv(const std::string& path) const;

  // Scratch space reused across queries from the owning actor thread.
  struct Scratch {
    std::vector<double> dist;  // double: neighbor selection must not quantize
    std::vector<int> order;
  };

  // Episodic intrinsic reward for `embedding` against the current contents:
  // k-NN by squared Euclidean distance, distance-average update, normalized
  // cluster-truncated inverse kernel, similarity cutoff. Does NOT insert the
  // query; updates the running distance average (hence non-const).
  double episodic_reward(const KernelConfig& cfg, const float* embedding, Scratch& scratch);
  double episodic_reward(const KernelConfig& cfg, const Tensor& embedding);

 private:
  int capacity_;
  int dim_;
  int size_ = 0;
  int next_ = 0;  // ring write position
  std::int64_t count_inserted_ = 0;
  double dm2_ = 0.0;
  std::vector<float> data_;  // capacity * dim
};

// Episode-boundary reset: the memory survives within a meta-episode and is
// wiped every `meta_episode_len` episodes. `episodes_completed` counts
// finished episodes before the one about to start.
void memory_reset(EpisodicMemory& memory, int meta_episode_len, std::int64_t episodes_completed);

}  // namespace neverup
