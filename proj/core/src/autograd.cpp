#include "refdense/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "refdense/errors.hpp"

namespace refdense {

double* GradSink::grad(const Tensor& parent) {
  if (!parent.requires_grad()) return nullptr;
  auto* node = parent.node();
  auto it = buffers_.find(node);
  if (it == buffers_.end()) {
    it = buffers_.emplace(node, std::vector<double>(node->values.size(), 0.0))
             .first;
  }
  return it->second.data();
}

bool GradMap::has(const Tensor& param) const {
  return grads_.count(param.id()) != 0;
}

Tensor GradMap::grad(const Tensor& param) const {
  auto it = grads_.find(param.id());
  if (it == grads_.end()) return Tensor::zeros(param.shape());
  return Tensor::from(param.shape(), it->second);
}

const std::vector<double>* GradMap::find(std::uint64_t id) const {
  auto it = grads_.find(id);
  return it == grads_.end() ? nullptr : &it->second;
}

GradMap backward(const Tensor& loss) {
  if (!loss.defined()) throw DimensionError("backward: undefined loss tensor");
  if (loss.numel() != 1)
    throw DimensionError("backward: loss must be scalar, got " +
                         shape_str(loss.shape()));

  GradMap out;
  if (!loss.requires_grad()) return out;

  // Iterative post-order DFS over grad-requiring nodes: parents precede
  // children in `order`, so the reversed walk sees every consumer of a node
  // before the node itself.
  std::vector<const TensorNode*> order;
  std::unordered_set<const TensorNode*> visited;
  struct Frame {
    const TensorNode* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.node(), 0});
  visited.insert(loss.node());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      const Tensor& p = f.node->parents[f.next_parent++];
      if (p.requires_grad() && !visited.count(p.node())) {
        visited.insert(p.node());
        stack.push_back({p.node(), 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  GradSink sink;
  sink.buffers_[loss.node()] = {1.0};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const TensorNode* node = *it;
    if (!node->backward) continue;
    auto buf = sink.buffers_.find(node);
    if (buf == sink.buffers_.end()) continue;  // no contribution reached it
    node->backward(buf->second, sink);
  }

  for (const TensorNode* node : order) {
    if (node->backward) continue;  // keep leaves only
    auto buf = sink.buffers_.find(node);
    if (buf != sink.buffers_.end())
      out.grads_.emplace(node->id, std::move(buf->second));
  }
  return out;
}

GradCheckReport check_gradients(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    const std::vector<Tensor>& params, double step, double tol,
    std::vector<std::string> names, double rel_floor) {
  GradCheckReport report;
  report.tol = tol;

  Tensor loss = f(params);
  if (!std::isfinite(loss.value()))
    throw ProbeError("check_gradients: non-finite loss at probe point");
  GradMap grads = backward(loss);

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    GradCheckParamReport pr;
    pr.name = pi < names.size() ? names[pi] : "param" + std::to_string(pi);
    const Tensor& p = params[pi];
    Tensor analytic = grads.grad(p);

    for (std::int64_t i = 0; i < p.numel(); ++i) {
      auto probe = [&](double delta) {
        std::vector<double> vals = p.values();
        vals[i] += delta;
        std::vector<Tensor> shifted = params;
        shifted[pi] = Tensor::from(p.shape(), std::move(vals), true);
        double v = f(shifted).value();
        if (!std::isfinite(v))
          throw ProbeError("check_gradients: non-finite loss while probing " +
                           pr.name);
        return v;
      };
      double fd = (probe(step) - probe(-step)) / (2.0 * step);
      double g = analytic.at(i);
      double abs_err = std::abs(fd - g);
      double rel_err = abs_err / std::max(rel_floor, std::abs(fd) + std::abs(g));
      pr.max_abs_err = std::max(pr.max_abs_err, abs_err);
      pr.max_rel_err = std::max(pr.max_rel_err, rel_err);
    }
    report.max_rel_err = std::max(report.max_rel_err, pr.max_rel_err);
    report.params.push_back(std::move(pr));
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

}  // namespace refdense
