#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "siamtrack/tensor.hpp"

namespace siamtrack::net {

/// A learnable tensor with its gradient accumulator.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param() = default;
  Param(std::string name, Shape shape, double fill = 0.0)
      : name(std::move(name)), value(shape, fill), grad(shape) {}

  void zero_grad() { grad = Tensor(value.shape()); }
};

/// Handle to a node of a Graph.
struct Var {
  static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();
  std::size_t id = kInvalid;
  bool valid() const { return id != kInvalid; }
};

enum class Mode { kTrain, kEval };

/// Reverse-mode tape. Ops append nodes during the forward pass; backward()
/// walks them in reverse, and parameter leaves add their gradient into the
/// owning Param.
///
/// A graph built with `record = false` keeps values only, which is what the
/// tracker uses for inference.
class Graph {
 public:
  /// Called with the graph and the node's own id; reads grad(self) and
  /// accumulates into its parents through accumulate().
  using BackwardFn = std::function<void(Graph&, Var self)>;

  explicit Graph(bool record = true) : record_(record) {}

  bool recording() const { return record_; }

  Var constant(Tensor value);
  /// Differentiable leaf not tied to a Param; read its gradient with grad().
  Var input(Tensor value);
  /// Leaf bound to `p`. After backward(), p.grad += d(out)/d(p.value).
  Var param(Param& p);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  /// Gradient of the last backward() target with respect to `v`; zeros if
  /// nothing flowed into it.
  Tensor grad(Var v) const;

  /// Appends an op result. `fn` is kept only when recording and at least one
  /// parent requires a gradient.
  Var record(Tensor value, const std::vector<Var>& parents, BackwardFn fn);

  /// Adds `g` into the gradient slot of `v` (no-op for constants).
  void accumulate(Var v, const Tensor& g);
  /// Mutable gradient slot of `v`, zero-initialised on first use. Only valid
  /// for nodes that require a gradient.
  Tensor& grad_slot(Var v);

  /// Seeds d(out)/d(out) = 1 for every element of `out` (or `seed` when
  /// given) and propagates.
  void backward(Var out);
  void backward(Var out, const Tensor& seed);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Param* param = nullptr;
    BackwardFn backward;
  };

  Var push(Node node);

  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace siamtrack::net
