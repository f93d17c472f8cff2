#pragma once

#include <functional>
#include <vector>

#include "petseg/common.hpp"
#include "petseg/tensor.hpp"

namespace petseg {

/// Tape of executed operations. Each op that sees a grad-requiring input
/// appends one node; backward() replays the nodes once, in reverse execution
/// order. A graph belongs to one training context and is not shared across
/// threads.
template <class S>
class Graph {
 public:
  explicit Graph(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  size_t size() const { return nodes_.size(); }

  void record(std::function<void()> backward_fn) {
    if (backward_done_)
      throw ValueError("recording onto a graph whose backward already ran; call reset() first");
    nodes_.push_back(std::move(backward_fn));
  }

  /// Seed d(loss)/d(loss) = 1 and sweep the tape backwards. A second call
  /// without reset() is rejected.
  void backward(const TensorPtr<S>& loss) {
    if (!loss) throw ValueError("backward: null loss tensor");
    if (loss->numel() != 1)
      throw ValueError(fmt::format("backward requires a scalar loss, got shape {}", shape_str(loss->shape)));
    if (backward_done_) throw ValueError("backward called twice without reset()");
    backward_done_ = true;
    loss->ensure_grad();
    loss->grad[0] += S(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

  /// Drop all recorded nodes (and their tensor references) and allow a new
  /// forward/backward cycle.
  void reset() {
    nodes_.clear();
    backward_done_ = false;
  }

 private:
  std::vector<std::function<void()>> nodes_;
  bool recording_;
  bool backward_done_ = false;
};

}  // namespace petseg
