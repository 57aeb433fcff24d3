#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <utility>

#include "collamamba/blocks/layout.hpp"
#include "collamamba/core/error.hpp"

namespace collamamba {

/// Bounded FIFO of consecutive frames, oldest first. Pushing into a full
/// buffer drops the oldest frame.
template <typename Item>
class FifoBuffer {
 public:
  explicit FifoBuffer(std::size_t capacity) : capacity_(capacity) {
    detail::require(capacity >= 1, "trajectory capacity must be >= 1");
  }

  void push(Item item) {
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(std::move(item));
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  bool full() const { return items_.size() == capacity_; }
  bool empty() const { return items_.empty(); }
  void clear() { items_.clear(); }

  const Item& operator[](std::size_t i) const { return items_[i]; }
  const Item& newest() const { return items_.back(); }
  const std::deque<Item>& frames() const { return items_; }

 private:
  std::size_t capacity_;
  std::deque<Item> items_;
};

/// Local observation history of one agent.
template <typename T>
using TrajectoryBuffer = FifoBuffer<BevGrid<T>>;

/// Past fused features of one agent.
template <typename T>
using GlobalTrajectory = FifoBuffer<FeatureSequence<T>>;

/// Stacks buffered rasters into (b, frames, H, W, c), oldest first.
template <typename T>
FrameStack<T> stack_frames(const TrajectoryBuffer<T>& buf) {
  detail::require(!buf.empty(), "stack_frames: empty trajectory");
  const auto& first = buf[0];
  const std::size_t b = first.batch(), H = first.height(), W = first.width(), c = first.channels();
  const std::size_t per = H * W * c;
  FrameStack<T> out(b, buf.size(), H, W, c);
  for (std::size_t f = 0; f < buf.size(); ++f) {
    detail::require(buf[f].values.shape() == first.values.shape(), "stack_frames: frames differ in shape");
    for (std::size_t s = 0; s < b; ++s)
      std::copy_n(buf[f].sample(s), per, out.sample(s) + f * per);
  }
  return out;
}

}  // namespace collamamba
