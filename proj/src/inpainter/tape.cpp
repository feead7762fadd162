#include "tiad/inpainter/tape.hpp"

#include <sstream>

#include "tiad/error.hpp"

namespace tiad::inpainter {

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "," : "") << dims_[i];
  os << '}';
  return os.str();
}

VarId Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, false, "constant", {}});
  return static_cast<VarId>(nodes_.size() - 1);
}

VarId Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, true, false, "leaf", {}});
  return static_cast<VarId>(nodes_.size() - 1);
}

VarId Tape::record(std::string_view op, Tensor value, std::initializer_list<VarId> inputs, BackwardFn backward) {
  bool needs = false;
  for (VarId in : inputs) needs = needs || nodes_.at(in).requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs, false, op, needs ? std::move(backward) : BackwardFn{}});
  return static_cast<VarId>(nodes_.size() - 1);
}

Tensor Tape::grad(VarId id) const {
  const Node& n = nodes_.at(id);
  if (n.has_grad) return n.grad;
  return Tensor(n.value.dims(), 0.0);
}

Tensor& Tape::grad_buffer(VarId id) {
  Node& n = nodes_.at(id);
  if (!n.has_grad) {
    n.grad = Tensor(n.value.dims(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::backward(VarId root, const Tensor& seed) {
  if (!seed.same_shape(nodes_.at(root).value)) {
    throw ShapeError("backward seed " + seed.shape_string() + " vs root " + nodes_.at(root).value.shape_string());
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  if (!nodes_[root].requires_grad) return;
  grad_buffer(root) = seed;
  for (VarId id = root; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.has_grad && n.backward) n.backward(*this, id);
  }
}

void Tape::backward(VarId root) { backward(root, Tensor(nodes_.at(root).value.dims(), 1.0)); }

}  // namespace tiad::inpainter
