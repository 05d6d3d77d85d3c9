#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "refdense/tensor.hpp"

namespace refdense {

class GradMap;

// Gradient accumulation bus for one backward pass. Operation closures ask it
// for their parents' buffers; parents outside the differentiated subgraph get
// nullptr and their contribution is dropped.
class GradSink {
 public:
  double* grad(const Tensor& parent);

 private:
  friend GradMap backward(const Tensor& loss);
  std::unordered_map<const TensorNode*, std::vector<double>> buffers_;
};

// Result of a backward pass: leaf id -> accumulated gradient. Leaves that do
// not appear have an identically zero gradient.
class GradMap {
 public:
  bool has(const Tensor& param) const;
  // Gradient tensor with the parameter's shape; zeros when absent.
  Tensor grad(const Tensor& param) const;
  const std::vector<double>* find(std::uint64_t id) const;
  std::size_t size() const { return grads_.size(); }

 private:
  friend GradMap backward(const Tensor& loss);
  std::unordered_map<std::uint64_t, std::vector<double>> grads_;
};

// Reverse-mode pass from a scalar loss. Deterministic: traversal order is a
// pure function of the recorded graph. Does not mutate any tensor, so
// independent losses may run backward concurrently against shared parameters.
GradMap backward(const Tensor& loss);

// --- Finite-difference validation -----------------------------------------

struct GradCheckParamReport {
  std::string name;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
};

struct GradCheckReport {
  bool pass = false;
  double tol = 0.0;
  double max_rel_err = 0.0;
  std::vector<GradCheckParamReport> params;
};

// Compares tape gradients of f against central finite differences, element by
// element. Relative error uses |g - d| / max(floor, |g| + |d|); the floor
// keeps pure roundoff noise on near-zero entries from dominating the report.
GradCheckReport check_gradients(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    const std::vector<Tensor>& params, double step = 1e-4, double tol = 1e-5,
    std::vector<std::string> names = {}, double rel_floor = 1e-6);

}  // namespace refdense
