#pragma once

#include <map>
#include <memory>
#include <mutex>

#include "neverup/tensor.hpp"

namespace neverup {

// Immutable copy of the learner's parameters, published as a unit.
struct ModelSnapshot {
  std::uint64_t version = 0;
  std::map<std::string, Tensor> q_params;
  std::map<std::string, Tensor> embed_params;
  std::map<std::string, Tensor> rnd_params;
};

// Last-writer-wins mailbox; readers get a stable shared_ptr.
class SnapshotMailbox {
 public:
  void publish(std::shared_ptr<const ModelSnapshot> snap) {
    std::lock_guard lock(mu_);
    latest_ = std::move(snap);
  }
  std::shared_ptr<const ModelSnapshot> latest() const {
    std::lock_guard lock(mu_);
    return latest_;
  }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const ModelSnapshot> latest_;
};

}  // namespace neverup
