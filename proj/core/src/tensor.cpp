#include "refdense/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "refdense/errors.hpp"

namespace refdense {

namespace {

std::atomic<std::uint64_t> g_next_id{1};

std::shared_ptr<TensorNode> make_node(Shape shape, std::vector<double> values,
                                      bool requires_grad) {
  if (shape.empty()) throw DimensionError("tensor shape must have rank >= 1");
  for (int e : shape) {
    if (e < 1)
      throw DimensionError("tensor extents must be >= 1, got " +
                           shape_str(shape));
  }
  auto n = numel_of(shape);
  if (static_cast<std::int64_t>(values.size()) != n) {
    std::ostringstream os;
    os << "tensor data length " << values.size() << " does not match shape "
       << shape_str(shape);
    throw DimensionError(os.str());
  }
  auto node = std::make_shared<TensorNode>();
  node->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

}  // namespace

std::int64_t numel_of(const Shape& shape) {
  std::int64_t n = 1;
  for (int e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = numel_of(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, 0.0),
                          requires_grad));
}

Tensor Tensor::full(Shape shape, double value) {
  auto n = numel_of(shape);
  return Tensor(
      make_node(std::move(shape), std::vector<double>(n, value), false));
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  return Tensor(make_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::op(Shape shape, std::vector<double> values,
                  std::vector<Tensor> parents, BackwardFn backward) {
  bool needs_grad = false;
  for (const auto& p : parents) needs_grad = needs_grad || p.requires_grad();
  auto node = make_node(std::move(shape), std::move(values), needs_grad);
  if (needs_grad) {
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

const Shape& Tensor::shape() const { return node_->shape; }

int Tensor::rank() const { return static_cast<int>(node_->shape.size()); }

std::int64_t Tensor::numel() const {
  return static_cast<std::int64_t>(node_->values.size());
}

int Tensor::extent(int axis) const { return node_->shape.at(axis); }

int Tensor::rows() const { return node_->shape.at(0); }

int Tensor::cols() const { return node_->shape.at(1); }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

std::uint64_t Tensor::id() const { return node_->id; }

double Tensor::value() const {
  if (numel() != 1)
    throw DimensionError("value() requires a single-element tensor, got " +
                         shape_str(shape()));
  return node_->values[0];
}

double Tensor::at(std::int64_t i) const { return node_->values.at(i); }

double Tensor::at(int i, int j) const {
  require_rank(*this, 2, "at(i,j)");
  return node_->values.at(static_cast<std::int64_t>(i) * cols() + j);
}

const std::vector<double>& Tensor::values() const { return node_->values; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void require_rank(const Tensor& t, int rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
  }
}

bool all_finite(const Tensor& t) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace refdense
