#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace refdense {

// Row-major dense tensors of 64-bit reals. Values are immutable once a tensor
// is created; "updates" (optimizer steps and the like) build new tensors.
// Operations record a reverse-mode closure so that autograd::backward can
// propagate gradients without mutating any tensor.

using Shape = std::vector<int>;

std::int64_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;
class GradSink;

// Reads the upstream gradient of the node's output and adds contributions to
// the parent buffers handed out by the sink.
using BackwardFn = std::function<void(const std::vector<double>&, GradSink&)>;

struct TensorNode;

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value);

  // Graph node constructor used by every operation. Parents that do not
  // require gradients are pruned: the result becomes a plain leaf.
  static Tensor op(Shape shape, std::vector<double> values,
                   std::vector<Tensor> parents, BackwardFn backward);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int rank() const;
  std::int64_t numel() const;
  int extent(int axis) const;
  int rows() const;  // extent(0), rank >= 1
  int cols() const;  // extent(1), rank >= 2
  bool requires_grad() const;
  std::uint64_t id() const;

  double value() const;  // single-element tensors only
  double at(std::int64_t i) const;
  double at(int i, int j) const;
  const std::vector<double>& values() const;

  TensorNode* node() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<TensorNode> node_;
};

struct TensorNode {
  std::uint64_t id = 0;
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<Tensor> parents;  // only set on op nodes
  BackwardFn backward;          // null on leaves
};

// Throws DimensionError unless both tensors have identical shapes.
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);
void require_rank(const Tensor& t, int rank, const char* op);
bool all_finite(const Tensor& t);

}  // namespace refdense
