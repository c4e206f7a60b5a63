#include "neverup/replay.hpp"

#include <cmath>

#include "neverup/errors.hpp"

namespace neverup {

void SequenceSample::check() const {
  if (valid_len < 1 || valid_len > length)
    throw DataError("sequence: valid_len " + std::to_string(valid_len) + " out of [1," +
                    std::to_string(length) + "]");
  const auto n = static_cast<std::size_t>(valid_len);
  if (actions.size() != n || r_ext.size() != n || r_int.size() != n || r_aug.size() != n ||
      mu.size() != n)
    throw DataError("sequence: per-step array size mismatch");
  if (obs.size() != n * static_cast<std::size_t>(obs_cells))
    throw DataError("sequence: obs buffer size mismatch");
  if (!terminal && final_obs.size() != static_cast<std::size_t>(obs_cells))
    throw DataError("sequence: missing final observation");
  if (!(priority > 0.0f)) throw DataError("sequence: priority must be positive");
  for (float m : mu)
    if (!(m > 0.0f)) throw DataError("sequence: stored behavior probability must be positive");
}

ReplayBuffer::ReplayBuffer(int capacity, double priority_exponent, int min_start)
    : capacity_(capacity), eta_(priority_exponent), min_start_(min_start) {
  if (capacity < 1) throw ConfigError("replay: capacity must be positive");
  if (priority_exponent < 0.0) throw ConfigError("replay: priority exponent must be >= 0");
  if (min_start < 1) throw ConfigError("replay: min_start must be positive");
  tree_width_ = 1;
  while (tree_width_ < capacity) tree_width_ *= 2;
  slots_.resize(static_cast<std::size_t>(capacity));
  generation_.assign(static_cast<std::size_t>(capacity), 0);
  tree_.assign(2 * static_cast<std::size_t>(tree_width_), 0.0);
}

void ReplayBuffer::tree_set(int slot, double weight) {
  int i = tree_width_ + slot;
  tree_[static_cast<std::size_t>(i)] = weight;
  for (i /= 2; i >= 1; i /= 2)
    tree_[static_cast<std::size_t>(i)] =
        tree_[static_cast<std::size_t>(2 * i)] + tree_[static_cast<std::size_t>(2 * i + 1)];
}

int ReplayBuffer::tree_sample(double u) const {
  int i = 1;
  while (i < tree_width_) {
    const double left = tree_[static_cast<std::size_t>(2 * i)];
    if (u < left) {
      i = 2 * i;
    } else {
      u -= left;
      i = 2 * i + 1;
    }
  }
  return std::min(i - tree_width_, size_ - 1);
}

void ReplayBuffer::insert(SequenceSample s) {
  s.priority = std::max(s.priority, kPriorityFloor);
  s.check();
  std::lock_guard lock(mu_);
  const int slot = next_slot_;
  next_slot_ = (next_slot_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
  ++inserted_;
  ++generation_[static_cast<std::size_t>(slot)];
  max_priority_ = std::max(max_priority_, static_cast<double>(s.priority));
  tree_set(slot, std::pow(static_cast<double>(s.priority), eta_));
  slots_[static_cast<std::size_t>(slot)] = std::move(s);
}

int ReplayBuffer::size() const {
  std::lock_guard lock(mu_);
  return size_;
}

std::int64_t ReplayBuffer::total_inserted() const {
  std::lock_guard lock(mu_);
  return inserted_;
}

bool ReplayBuffer::ready() const {
  std::lock_guard lock(mu_);
  return size_ >= min_start_;
}

double ReplayBuffer::max_priority() const {
  std::lock_guard lock(mu_);
  return max_priority_;
}

std::optional<ReplayBuffer::Batch> ReplayBuffer::sample(int batch, Rng& rng) {
  std::lock_guard lock(mu_);
  if (size_ < min_start_) return std::nullopt;
  Batch out;
  out.sequences.reserve(static_cast<std::size_t>(batch));
  out.tickets.reserve(static_cast<std::size_t>(batch));
  const double total = tree_[1];
  if (total <= 0.0) throw NumericError("replay: priority mass vanished");
  for (int i = 0; i < batch; ++i) {
    const int slot = tree_sample(rng.uniform() * total);
    out.sequences.push_back(slots_[static_cast<std::size_t>(slot)]);
    out.tickets.push_back({slot, generation_[static_cast<std::size_t>(slot)]});
  }
  return out;
}

void ReplayBuffer::update_priorities(const std::vector<Ticket>& tickets,
                                     const std::vector<float>& priorities) {
  if (tickets.size() != priorities.size())
    throw UsageError("replay: tickets/priorities size mismatch");
  std::lock_guard lock(mu_);
  for (std::size_t i = 0; i < tickets.size(); ++i) {
    const Ticket& t = tickets[i];
    if (t.slot < 0 || t.slot >= capacity_) throw UsageError("replay: bad ticket slot");
    if (generation_[static_cast<std::size_t>(t.slot)] != t.generation) continue;  // evicted since
    const float p = std::max(priorities[i], kPriorityFloor);
    slots_[static_cast<std::size_t>(t.slot)].priority = p;
    max_priority_ = std::max(max_priority_, static_cast<double>(p));
    tree_set(t.slot, std::pow(static_cast<double>(p), eta_));
  }
}

void ReplayBuffer::for_each(const std::function<void(const SequenceSample&)>& fn) const {
  std::lock_guard lock(mu_);
  // oldest-first
  const int start = size_ < capacity_ ? 0 : next_slot_;
  for (int i = 0; i < size_; ++i)
    fn(slots_[static_cast<std::size_t>((start + i) % capacity_)]);
}

}  // namespace neverup
