#include "siamtrack/net/graph.hpp"

#include "siamtrack/errors.hpp"

namespace siamtrack::net {

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::input(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = record_;
  return push(std::move(n));
}

Var Graph::param(Param& p) {
  Node n;
  n.value = p.value;
  n.requires_grad = record_;
  n.param = &p;
  return push(std::move(n));
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.empty()) return Tensor(n.value.shape());
  return n.grad;
}

Var Graph::record(Tensor value, const std::vector<Var>& parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (Var p : parents) {
      if (nodes_.at(p.id).requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.backward = std::move(fn);
  }
  return push(std::move(n));
}

Tensor& Graph::grad_slot(Var v) {
  Node& n = nodes_.at(v.id);
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Graph::accumulate(Var v, const Tensor& g) {
  if (!nodes_.at(v.id).requires_grad) return;
  grad_slot(v) += g;
}

void Graph::backward(Var out) {
  backward(out, Tensor(value(out).shape(), 1.0));
}

void Graph::backward(Var out, const Tensor& seed) {
  if (!record_) throw std::logic_error("graph: backward on a non-recording graph");
  if (!(seed.shape() == value(out).shape())) {
    throw ShapeError("graph: backward seed " + to_string(seed.shape()) + " vs output " +
                     to_string(value(out).shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor();
  if (!nodes_.at(out.id).requires_grad) return;
  nodes_[out.id].grad = seed;
  for (std::size_t i = out.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) n.backward(*this, Var{i});
    if (n.param != nullptr) {
      if (n.param->grad.shape() != n.grad.shape()) n.param->grad = Tensor(n.grad.shape());
      n.param->grad += n.grad;
    }
  }
}

}  // namespace siamtrack::net
