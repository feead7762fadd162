#pragma once

#include <functional>
#include <string_view>
#include <vector>

#include "tiad/inpainter/tensor.hpp"

namespace tiad::inpainter {

using VarId = int;

/// Reverse-mode gradient record. Every primitive appends a node holding its
/// output and a closure that maps the output gradient onto its inputs.
/// Nodes are appended in evaluation order, so a reverse sweep is a valid
/// topological order.
class Tape {
 public:
  class Node;
  using BackwardFn = std::function<void(Tape& tape, VarId self)>;

  /// Value that never receives a gradient (inputs, targets, masks).
  VarId constant(Tensor value);
  /// Leaf that accumulates a gradient (network parameters).
  VarId leaf(Tensor value);
  /// Output of a primitive. If no input requires a gradient the closure is dropped.
  VarId record(std::string_view op, Tensor value, std::initializer_list<VarId> inputs, BackwardFn backward);

  const Tensor& value(VarId id) const { return nodes_.at(id).value; }
  bool requires_grad(VarId id) const { return nodes_.at(id).requires_grad; }
  std::string_view op(VarId id) const { return nodes_.at(id).op; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Gradient of the last backward() root with respect to id; zeros if none reached it.
  Tensor grad(VarId id) const;

  /// Mutable gradient buffer for use inside backward closures; allocated on demand.
  Tensor& grad_buffer(VarId id);
  /// Gradient flowing into `self` during the sweep.
  const Tensor& upstream(VarId self) const { return nodes_.at(self).grad; }

  /// Seeds root with `seed` and sweeps every recorded node in reverse.
  void backward(VarId root, const Tensor& seed);
  /// Shorthand for a scalar root with seed 1.
  void backward(VarId root);

  class Node {
   public:
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::string_view op;
    BackwardFn backward;
  };

 private:
  std::vector<Node> nodes_;
};

}  // namespace tiad::inpainter
