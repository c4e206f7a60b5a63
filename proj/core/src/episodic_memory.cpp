#include "neverup/episodic_memory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "neverup/errors.hpp"

namespace neverup {

namespace {
constexpr double kDm2Decay = 0.99;
}

void KernelConfig::validate() const {
  if (epsilon <= 0.0) throw ConfigError("kernel: epsilon must be positive");
  if (k < 1) throw ConfigError("kernel: k must be >= 1");
  if (c <= 0.0) throw ConfigError("kernel: c must be positive");
  if (xi < 0.0) throw ConfigError("kernel: xi must be nonnegative");
  if (sm <= 0.0) throw ConfigError("kernel: sm must be positive");
}

EpisodicMemory::EpisodicMemory(int capacity, int dim) : capacity_(capacity), dim_(dim) {
  if (capacity < 1) throw ConfigError("episodic memory: capacity must be positive");
  if (dim < 1) throw ConfigError("episodic memory: embedding dim must be positive");
  data_.resize(static_cast<std::size_t>(capacity) * dim);
}

void EpisodicMemory::insert(const float* embedding) {
  std::copy_n(embedding, dim_, data_.begin() + static_cast<std::size_t>(next_) * dim_);
  next_ = (next_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
  ++count_inserted_;
}

void EpisodicMemory::insert(const Tensor& embedding) {
  if (embedding.size() != dim_)
    throw ConfigError("episodic memory: embedding size " + std::to_string(embedding.size()) +
                      ", expected " + std::to_string(dim_));
  insert(embedding.v.data());
}

const float* EpisodicMemory::slot(int age_index) const {
  if (age_index < 0 || age_index >= size_)
    throw UsageError("episodic memory: slot " + std::to_string(age_index) + " out of range");
  const int start = size_ < capacity_ ? 0 : next_;
  const int pos = (start + age_index) % capacity_;
  return data_.data() + static_cast<std::size_t>(pos) * dim_;
}

void EpisodicMemory::clear() {
  size_ = 0;
  next_ = 0;
  count_inserted_ = 0;
  dm2_ = 0.0;
}

void EpisodicMemory::dump_csv(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("episodic memory: cannot open " + path);
  os << "slot";
  for (int j = 0; j < dim_; ++j) os << ",e" << j;
  os << "\n";
  for (int i = 0; i < size_; ++i) {
    os << i;
    const float* e = slot(i);
    for (int j = 0; j < dim_; ++j) os << "," << e[j];
    os << "\n";
  }
}

double EpisodicMemory::episodic_reward(const KernelConfig& cfg, const float* embedding,
                                       Scratch& scratch) {
  cfg.validate();

  // Squared Euclidean distance to every stored slot (exact linear scan).
  const int m = size_;
  scratch.dist.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const float* e = data_.data() + static_cast<std::size_t>(i) * dim_;
    double d2 = 0.0;
    for (int j = 0; j < dim_; ++j) {
      const double diff = static_cast<double>(embedding[j]) - e[j];
      d2 += diff * diff;
    }
    scratch.dist[static_cast<std::size_t>(i)] = d2;
  }

  // k nearest (fewer when the memory holds fewer entries).
  const int kn = std::min(cfg.k, m);
  scratch.order.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) scratch.order[static_cast<std::size_t>(i)] = i;
  if (kn < m)
    std::nth_element(scratch.order.begin(), scratch.order.begin() + kn, scratch.order.end(),
                     [&](int a, int b) {
                       return scratch.dist[static_cast<std::size_t>(a)] <
                              scratch.dist[static_cast<std::size_t>(b)];
                     });

  // Running average of the squared neighbor distances, updated before the
  // normalization below. Seeded with the first nonzero mean so early queries
  // are not divided by a still-decaying average.
  if (kn > 0) {
    double mean = 0.0;
    for (int i = 0; i < kn; ++i)
      mean += scratch.dist[static_cast<std::size_t>(scratch.order[static_cast<std::size_t>(i)])];
    mean /= kn;
    dm2_ = dm2_ == 0.0 ? mean : kDm2Decay * dm2_ + (1.0 - kDm2Decay) * mean;
  }

  // Normalize, truncate small distances into one cluster, apply the inverse
  // kernel, and sum similarities.
  double kernel_sum = 0.0;
  for (int i = 0; i < kn; ++i) {
    const double d2 = scratch.dist[static_cast<std::size_t>(scratch.order[static_cast<std::size_t>(i)])];
    double dn = dm2_ == 0.0 ? 0.0 : d2 / dm2_;
    dn = std::max(dn - cfg.xi, 0.0);
    kernel_sum += cfg.epsilon / (dn + cfg.epsilon);
  }

  if (kn == 0 && cfg.zero_when_empty) return 0.0;
  const double similarity = std::sqrt(kernel_sum) + cfg.c;
  if (similarity > cfg.sm) return 0.0;
  return 1.0 / similarity;
}

double EpisodicMemory::episodic_reward(const KernelConfig& cfg, const Tensor& embedding) {
  if (embedding.size() != dim_)
    throw ConfigError("episodic memory: query size " + std::to_string(embedding.size()) +
                      ", expected " + std::to_string(dim_));
  Scratch scratch;
  return episodic_reward(cfg, embedding.v.data(), scratch);
}

void memory_reset(EpisodicMemory& memory, int meta_episode_len, std::int64_t episodes_completed) {
  if (meta_episode_len < 1) throw ConfigError("memory_reset: meta_episode_len must be >= 1");
  if (episodes_completed % meta_episode_len == 0) memory.clear();
}

}  // namespace neverup
