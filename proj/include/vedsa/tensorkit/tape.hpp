#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vedsa/error.hpp"
#include "vedsa/rng.hpp"

namespace vedsa::tk {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out + "]";
}

/// Trainable parameter: values plus a gradient accumulator of the same shape.
struct Tensor {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0)
      : shape(std::move(s)), values(shape_size(shape), fill), grad(values.size(), 0.0) {}

  std::size_t size() const { return values.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

using NamedParams = std::vector<std::pair<std::string, Tensor*>>;
using ConstNamedParams = std::vector<std::pair<std::string, const Tensor*>>;

/// Handle to a node recorded on a Tape.
struct Var {
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::size_t id = kNone;
  bool valid() const { return id != kNone; }
};

/// Reverse-mode tape. Nodes are appended in evaluation order; backward()
/// walks them in reverse, so gradient accumulation order is fixed.
///
/// Parameters are bound by address and deduplicated, so a layer applied at
/// every time step shares one leaf. Their gradients stay on the tape until
/// accumulate_into() hands them to the owning model.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  Var constant(Shape shape, std::vector<double> values) {
    return record(std::move(shape), std::move(values), nullptr);
  }

  Var constant(std::vector<double> values) {
    Shape s{values.size()};
    return constant(std::move(s), std::move(values));
  }

  Var param(const Tensor& t) {
    if (auto it = param_ids_.find(&t); it != param_ids_.end()) return Var{it->second};
    Var v = record(t.shape, t.values, nullptr);
    nodes_[v.id].param = &t;
    param_ids_.emplace(&t, v.id);
    return v;
  }

  /// Folds a discrete forward-pass decision (ReLU sign, pooling argmax) into a
  /// running hash. Two evaluations with equal hashes lie on the same smooth piece.
  void note_branch(std::uint64_t decision) { branch_hash_ = mix_seed(branch_hash_ ^ decision); }
  std::uint64_t branch_hash() const { return branch_hash_; }

  /// Appends a node; throws NumericError if any value is NaN or infinite.
  Var record(Shape shape, std::vector<double> values, Backward backward) {
    if (shape_size(shape) != values.size())
      throw StructuralError("node shape " + shape_string(shape) + " does not match " +
                            std::to_string(values.size()) + " values");
    for (double x : values)
      if (!std::isfinite(x))
        throw NumericError("non-finite value in forward pass (node " + std::to_string(nodes_.size()) + ")");
    nodes_.push_back(Node{std::move(shape), std::move(values), {}, std::move(backward), nullptr});
    return Var{nodes_.size() - 1};
  }

  std::span<const double> value(Var v) const { return node(v).value; }
  double scalar(Var v) const {
    const Node& n = node(v);
    if (n.value.size() != 1) throw StructuralError("node is not a scalar");
    return n.value[0];
  }
  const Shape& shape(Var v) const { return node(v).shape; }
  std::size_t size() const { return nodes_.size(); }

  // Accessors for backward closures (by id: node storage may move while recording).
  std::span<const double> value_of(std::size_t id) const { return nodes_[id].value; }
  std::span<double> grad_of(std::size_t id) { return nodes_[id].grad; }

  std::span<const double> grad(Var v) const {
    if (!backward_done_) throw UsageError("gradients requested before backward()");
    return node(v).grad;
  }

  /// Gradient of the scalar `loss` with respect to every recorded node.
  void backward(Var loss) {
    if (nodes_.empty() || !loss.valid() || loss.id >= nodes_.size())
      throw UsageError("backward() called before a forward pass was recorded");
    if (backward_done_) throw UsageError("backward() already ran on this tape");
    if (nodes_[loss.id].value.size() != 1) throw StructuralError("loss must be a scalar");
    for (Node& n : nodes_) n.grad.assign(n.value.size(), 0.0);
    nodes_[loss.id].grad[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      if (nodes_[i].backward) nodes_[i].backward(*this, i);
    }
    backward_done_ = true;
  }

  /// Gradient of a bound parameter; empty if the loss never used it.
  std::span<const double> param_grad(const Tensor& t) const {
    if (!backward_done_) throw UsageError("gradients requested before backward()");
    auto it = param_ids_.find(&t);
    if (it == param_ids_.end()) return {};
    return nodes_[it->second].grad;
  }

  /// Adds the recorded parameter gradients into the matching tensors.
  void accumulate_into(const NamedParams& params) const {
    if (!backward_done_) throw UsageError("accumulate_into() before backward()");
    for (const auto& [name, t] : params) {
      auto it = param_ids_.find(t);
      if (it == param_ids_.end()) continue;
      const auto& g = nodes_[it->second].grad;
      for (std::size_t k = 0; k < g.size(); ++k) t->grad[k] += g[k];
    }
  }

 private:
  std::uint64_t branch_hash_ = 0;
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    Backward backward;
    const Tensor* param = nullptr;
  };

  const Node& node(Var v) const {
    if (!v.valid() || v.id >= nodes_.size()) throw UsageError("invalid tape variable");
    return nodes_[v.id];
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, std::size_t> param_ids_;
  bool backward_done_ = false;
};

}  // namespace vedsa::tk
