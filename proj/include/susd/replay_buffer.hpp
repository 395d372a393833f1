#pragma once

#include <algorithm>
#include <mutex>
#include <vector>

#include "susd/error.hpp"
#include "susd/rng.hpp"
#include "susd/trajectory.hpp"

namespace susd {

// Ring buffer of transitions with FIFO eviction and uniform sampling.
// Appends may come from parallel collectors; sampling is serialized.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ContractError("ReplayBuffer: zero capacity");
    data_.reserve(std::min<size_t>(capacity, 1 << 16));
  }

  void append(Transition t) {
    std::lock_guard<std::mutex> lock(mu_);
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return data_.size();
  }

  size_t capacity() const { return capacity_; }

  const Transition& at(size_t idx) const { return data_[idx]; }

  std::vector<size_t> sample_indices(int n, Rng& rng) const {
    std::lock_guard<std::mutex> lock(mu_);
    if (data_.empty()) throw ContractError("ReplayBuffer: sampling from empty buffer");
    std::vector<size_t> out(static_cast<size_t>(n));
    for (auto& idx : out)
      idx = static_cast<size_t>(rng.uniform_int(static_cast<int>(data_.size())));
    return out;
  }

 private:
  mutable std::mutex mu_;
  std::vector<Transition> data_;
  size_t head_ = 0;
  size_t capacity_;
};

}  // namespace susd
