#include "refdense/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "refdense/autograd.hpp"
#include "refdense/errors.hpp"

namespace refdense {

namespace {

using EMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMatrix>;
using ECMap = Eigen::Map<const EMatrix>;

ECMap as_matrix(const Tensor& t) {
  return ECMap(t.values().data(), t.rows(), t.cols());
}

// Rows of the trailing axis for softmax-style ops on any rank.
std::pair<std::int64_t, int> trailing_rows(const Tensor& t) {
  int n = t.extent(t.rank() - 1);
  return {t.numel() / n, n};
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner extents differ, " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const int m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(static_cast<std::size_t>(m) * n);
  EMap(out.data(), m, n).noalias() = as_matrix(a) * as_matrix(b);
  return Tensor::op(
      {m, n}, std::move(out), {a, b},
      [a, b, m, k, n](const std::vector<double>& gy, GradSink& sink) {
        ECMap gy_m(gy.data(), m, n);
        if (double* ga = sink.grad(a))
          EMap(ga, m, k).noalias() += gy_m * as_matrix(b).transpose();
        if (double* gb = sink.grad(b))
          EMap(gb, k, n).noalias() += as_matrix(a).transpose() * gy_m;
      });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const int m = a.rows(), n = a.cols();
  std::vector<double> out(static_cast<std::size_t>(m) * n);
  EMap(out.data(), n, m) = as_matrix(a).transpose();
  return Tensor::op({n, m}, std::move(out), {a},
                    [a, m, n](const std::vector<double>& gy, GradSink& sink) {
                      if (double* ga = sink.grad(a))
                        EMap(ga, m, n) += ECMap(gy.data(), n, m).transpose();
                    });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.values());
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return Tensor::op(a.shape(), std::move(out), {a, b},
                    [a, b](const std::vector<double>& gy, GradSink& sink) {
                      if (double* ga = sink.grad(a))
                        for (std::size_t i = 0; i < gy.size(); ++i)
                          ga[i] += gy[i];
                      if (double* gb = sink.grad(b))
                        for (std::size_t i = 0; i < gy.size(); ++i)
                          gb[i] += gy[i];
                    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.values());
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return Tensor::op(a.shape(), std::move(out), {a, b},
                    [a, b](const std::vector<double>& gy, GradSink& sink) {
                      if (double* ga = sink.grad(a))
                        for (std::size_t i = 0; i < gy.size(); ++i)
                          ga[i] += gy[i];
                      if (double* gb = sink.grad(b))
                        for (std::size_t i = 0; i < gy.size(); ++i)
                          gb[i] -= gy[i];
                    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.values());
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return Tensor::op(a.shape(), std::move(out), {a, b},
                    [a, b](const std::vector<double>& gy, GradSink& sink) {
                      if (double* ga = sink.grad(a)) {
                        const auto& bv2 = b.values();
                        for (std::size_t i = 0; i < gy.size(); ++i)
                          ga[i] += gy[i] * bv2[i];
                      }
                      if (double* gb = sink.grad(b)) {
                        const auto& av = a.values();
                        for (std::size_t i = 0; i < gy.size(); ++i)
                          gb[i] += gy[i] * av[i];
                      }
                    });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.values());
  for (double& v : out) v *= c;
  return Tensor::op(a.shape(), std::move(out), {a},
                    [a, c](const std::vector<double>& gy, GradSink& sink) {
                      if (double* ga = sink.grad(a))
                        for (std::size_t i = 0; i < gy.size(); ++i)
                          ga[i] += c * gy[i];
                    });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  require_rank(a, 2, "add_bias");
  require_rank(bias, 1, "add_bias");
  if (bias.rows() != a.cols())
    throw DimensionError("add_bias: bias extent " + shape_str(bias.shape()) +
                         " does not match columns of " + shape_str(a.shape()));
  const int m = a.rows(), n = a.cols();
  std::vector<double> out(a.values());
  const auto& bv = bias.values();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i) * n + j] += bv[j];
  return Tensor::op(
      {m, n}, std::move(out), {a, bias},
      [a, bias, m, n](const std::vector<double>& gy, GradSink& sink) {
        if (double* ga = sink.grad(a))
          for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
        if (double* gb = sink.grad(bias))
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
              gb[j] += gy[static_cast<std::size_t>(i) * n + j];
      });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.values());
  for (double& v : out) {
    // Branch on sign so large |v| saturates gradually instead of overflowing
    // exp; keeps sigmoid(-745) a positive denormal in 64-bit.
    if (v >= 0.0) {
      v = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      v = e / (1.0 + e);
    }
  }
  std::vector<double> y = out;
  return Tensor::op(x.shape(), std::move(out), {x},
                    [x, y](const std::vector<double>& gy, GradSink& sink) {
                      if (double* gx = sink.grad(x))
                        for (std::size_t i = 0; i < gy.size(); ++i)
                          gx[i] += gy[i] * y[i] * (1.0 - y[i]);
                    });
}

Tensor softmax_last(const Tensor& x) {
  auto [m, n] = trailing_rows(x);
  std::vector<double> out(x.values());
  for (std::int64_t r = 0; r < m; ++r) {
    double* row = out.data() + r * n;
    double mx = *std::max_element(row, row + n);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (int j = 0; j < n; ++j) row[j] /= sum;
  }
  std::vector<double> y = out;
  return Tensor::op(x.shape(), std::move(out), {x},
                    [x, y, m = m, n = n](const std::vector<double>& gy,
                                         GradSink& sink) {
                      double* gx = sink.grad(x);
                      if (!gx) return;
                      for (std::int64_t r = 0; r < m; ++r) {
                        const double* yr = y.data() + r * n;
                        const double* gr = gy.data() + r * n;
                        double dot = 0.0;
                        for (int j = 0; j < n; ++j) dot += gr[j] * yr[j];
                        double* gxr = gx + r * n;
                        for (int j = 0; j < n; ++j)
                          gxr[j] += (gr[j] - dot) * yr[j];
                      }
                    });
}

Tensor log(const Tensor& x) {
  std::vector<double> out(x.values());
  for (double& v : out) v = std::log(v);
  return Tensor::op(x.shape(), std::move(out), {x},
                    [x](const std::vector<double>& gy, GradSink& sink) {
                      if (double* gx = sink.grad(x)) {
                        const auto& xv = x.values();
                        for (std::size_t i = 0; i < gy.size(); ++i)
                          gx[i] += gy[i] / xv[i];
                      }
                    });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  std::vector<double> out(x.values());
  for (double& v : out) v = std::min(hi, std::max(lo, v));
  return Tensor::op(x.shape(), std::move(out), {x},
                    [x, lo, hi](const std::vector<double>& gy, GradSink& sink) {
                      if (double* gx = sink.grad(x)) {
                        const auto& xv = x.values();
                        for (std::size_t i = 0; i < gy.size(); ++i)
                          if (xv[i] >= lo && xv[i] <= hi) gx[i] += gy[i];
                      }
                    });
}

Tensor gelu(const Tensor& x) {
  constexpr double inv_sqrt2 = std::numbers::sqrt2 / 2.0;
  std::vector<double> out(x.values());
  for (double& v : out) v = v * 0.5 * (1.0 + std::erf(v * inv_sqrt2));
  return Tensor::op(
      x.shape(), std::move(out), {x},
      [x](const std::vector<double>& gy, GradSink& sink) {
        double* gx = sink.grad(x);
        if (!gx) return;
        constexpr double inv_sqrt2pi = 0.3989422804014327;
        const auto& xv = x.values();
        for (std::size_t i = 0; i < gy.size(); ++i) {
          double cdf = 0.5 * (1.0 + std::erf(xv[i] * inv_sqrt2));
          double pdf = inv_sqrt2pi * std::exp(-0.5 * xv[i] * xv[i]);
          gx[i] += gy[i] * (cdf + xv[i] * pdf);
        }
      });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  auto [m, n] = trailing_rows(x);
  require_rank(gamma, 1, "layer_norm");
  require_rank(beta, 1, "layer_norm");
  if (gamma.rows() != n || beta.rows() != n)
    throw DimensionError("layer_norm: gamma/beta must match trailing extent " +
                         std::to_string(n));

  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(m);
  const auto& xv = x.values();
  for (std::int64_t r = 0; r < m; ++r) {
    const double* row = xv.data() + r * n;
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += row[j];
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= n;
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < n; ++j)
      xhat[r * n + j] = (row[j] - mean) * inv_std[r];
  }
  std::vector<double> out(x.numel());
  const auto& gv = gamma.values();
  const auto& bv = beta.values();
  for (std::int64_t r = 0; r < m; ++r)
    for (int j = 0; j < n; ++j)
      out[r * n + j] = gv[j] * xhat[r * n + j] + bv[j];

  return Tensor::op(
      x.shape(), std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, inv_std, m = m, n = n](
          const std::vector<double>& gy, GradSink& sink) {
        const auto& gv = gamma.values();
        double* gx = sink.grad(x);
        double* gg = sink.grad(gamma);
        double* gb = sink.grad(beta);
        for (std::int64_t r = 0; r < m; ++r) {
          const double* gr = gy.data() + r * n;
          const double* xh = xhat.data() + r * n;
          if (gg || gb) {
            for (int j = 0; j < n; ++j) {
              if (gg) gg[j] += gr[j] * xh[j];
              if (gb) gb[j] += gr[j];
            }
          }
          if (gx) {
            double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
            for (int j = 0; j < n; ++j) {
              double dxhat = gr[j] * gv[j];
              mean_dxhat += dxhat;
              mean_dxhat_xhat += dxhat * xh[j];
            }
            mean_dxhat /= n;
            mean_dxhat_xhat /= n;
            double* gxr = gx + r * n;
            for (int j = 0; j < n; ++j) {
              double dxhat = gr[j] * gv[j];
              gxr[j] +=
                  inv_std[r] * (dxhat - mean_dxhat - xh[j] * mean_dxhat_xhat);
            }
          }
        }
      });
}

Tensor conv1d(const Tensor& x, const Tensor& kernel, int stride) {
  require_rank(x, 2, "conv1d");
  require_rank(kernel, 3, "conv1d");
  if (stride < 1) throw ConfigError("conv1d: stride must be positive");
  const int w = kernel.extent(0);
  if (w % 2 == 0)
    throw ConfigError("conv1d: kernel width must be odd, got " +
                      std::to_string(w));
  if (kernel.extent(1) != x.cols())
    throw DimensionError("conv1d: kernel input dim " +
                         shape_str(kernel.shape()) + " does not match " +
                         shape_str(x.shape()));
  const int t_in = x.rows(), d_in = x.cols(), d_out = kernel.extent(2);
  const int pad = w / 2;
  const int t_out = (t_in + stride - 1) / stride;

  const auto& xv = x.values();
  const auto& kv = kernel.values();
  std::vector<double> out(static_cast<std::size_t>(t_out) * d_out, 0.0);
  for (int to = 0; to < t_out; ++to) {
    for (int dw = 0; dw < w; ++dw) {
      int ti = to * stride + dw - pad;
      if (ti < 0 || ti >= t_in) continue;
      const double* xr = xv.data() + static_cast<std::size_t>(ti) * d_in;
      const double* kr = kv.data() + static_cast<std::size_t>(dw) * d_in * d_out;
      double* orow = out.data() + static_cast<std::size_t>(to) * d_out;
      for (int di = 0; di < d_in; ++di) {
        const double xval = xr[di];
        const double* kc = kr + static_cast<std::size_t>(di) * d_out;
        for (int dc = 0; dc < d_out; ++dc) orow[dc] += xval * kc[dc];
      }
    }
  }

  return Tensor::op(
      {t_out, d_out}, std::move(out), {x, kernel},
      [x, kernel, stride, w, pad, t_in, d_in, d_out,
       t_out](const std::vector<double>& gy, GradSink& sink) {
        const auto& xv2 = x.values();
        const auto& kv2 = kernel.values();
        double* gx = sink.grad(x);
        double* gk = sink.grad(kernel);
        for (int to = 0; to < t_out; ++to) {
          const double* grow = gy.data() + static_cast<std::size_t>(to) * d_out;
          for (int dw = 0; dw < w; ++dw) {
            int ti = to * stride + dw - pad;
            if (ti < 0 || ti >= t_in) continue;
            for (int di = 0; di < d_in; ++di) {
              const std::size_t koff =
                  (static_cast<std::size_t>(dw) * d_in + di) * d_out;
              if (gx) {
                double acc = 0.0;
                for (int dc = 0; dc < d_out; ++dc)
                  acc += grow[dc] * kv2[koff + dc];
                gx[static_cast<std::size_t>(ti) * d_in + di] += acc;
              }
              if (gk) {
                const double xval =
                    xv2[static_cast<std::size_t>(ti) * d_in + di];
                for (int dc = 0; dc < d_out; ++dc)
                  gk[koff + dc] += grow[dc] * xval;
              }
            }
          }
        }
      });
}

Tensor upsample_linear(const Tensor& x, int target_len) {
  require_rank(x, 2, "upsample_linear");
  if (target_len < 1)
    throw ConfigError("upsample_linear: target length must be positive");
  const int t = x.rows(), d = x.cols();

  // Precompute (left index, weight) per output row.
  std::vector<int> left(target_len);
  std::vector<double> frac(target_len);
  for (int i = 0; i < target_len; ++i) {
    double coord = (t == 1 || target_len == 1)
                       ? 0.0
                       : static_cast<double>(i) * (t - 1) / (target_len - 1);
    int j = std::min(static_cast<int>(coord), t - 1);
    if (j == t - 1 && t > 1) j = t - 2;  // keep j+1 in range; frac becomes 1
    left[i] = (t == 1) ? 0 : j;
    frac[i] = (t == 1) ? 0.0 : coord - j;
  }

  const auto& xv = x.values();
  std::vector<double> out(static_cast<std::size_t>(target_len) * d);
  for (int i = 0; i < target_len; ++i) {
    const int j = left[i];
    const double a = frac[i];
    const double* x0 = xv.data() + static_cast<std::size_t>(j) * d;
    const double* x1 = (t == 1) ? x0 : x0 + d;
    double* orow = out.data() + static_cast<std::size_t>(i) * d;
    for (int c = 0; c < d; ++c) orow[c] = (1.0 - a) * x0[c] + a * x1[c];
  }

  return Tensor::op(
      {target_len, d}, std::move(out), {x},
      [x, left, frac, t, d, target_len](const std::vector<double>& gy,
                                        GradSink& sink) {
        double* gx = sink.grad(x);
        if (!gx) return;
        for (int i = 0; i < target_len; ++i) {
          const int j = left[i];
          const double a = frac[i];
          const double* grow = gy.data() + static_cast<std::size_t>(i) * d;
          double* g0 = gx + static_cast<std::size_t>(j) * d;
          double* g1 = (t == 1) ? g0 : g0 + d;
          for (int c = 0; c < d; ++c) {
            g0[c] += (1.0 - a) * grow[c];
            if (t > 1) g1[c] += a * grow[c];
          }
        }
      });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const int m = parts[0].rows();
  int n_total = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.rows() != m)
      throw DimensionError("concat_cols: row mismatch " +
                           shape_str(parts[0].shape()) + " vs " +
                           shape_str(p.shape()));
    n_total += p.cols();
  }
  std::vector<double> out(static_cast<std::size_t>(m) * n_total);
  int off = 0;
  for (const auto& p : parts) {
    const int n = p.cols();
    const auto& pv = p.values();
    for (int i = 0; i < m; ++i)
      std::copy(pv.begin() + static_cast<std::size_t>(i) * n,
                pv.begin() + static_cast<std::size_t>(i + 1) * n,
                out.begin() + static_cast<std::size_t>(i) * n_total + off);
    off += n;
  }
  return Tensor::op(
      {m, n_total}, std::move(out), parts,
      [parts, m, n_total](const std::vector<double>& gy, GradSink& sink) {
        int off2 = 0;
        for (const auto& p : parts) {
          const int n = p.cols();
          if (double* gp = sink.grad(p)) {
            for (int i = 0; i < m; ++i)
              for (int j = 0; j < n; ++j)
                gp[static_cast<std::size_t>(i) * n + j] +=
                    gy[static_cast<std::size_t>(i) * n_total + off2 + j];
          }
          off2 += n;
        }
      });
}

Tensor slice_cols(const Tensor& x, int from, int len) {
  require_rank(x, 2, "slice_cols");
  if (from < 0 || len < 1 || from + len > x.cols())
    throw DimensionError("slice_cols: range [" + std::to_string(from) + "," +
                         std::to_string(from + len) + ") out of " +
                         shape_str(x.shape()));
  const int m = x.rows(), n = x.cols();
  std::vector<double> out(static_cast<std::size_t>(m) * len);
  const auto& xv = x.values();
  for (int i = 0; i < m; ++i)
    std::copy(xv.begin() + static_cast<std::size_t>(i) * n + from,
              xv.begin() + static_cast<std::size_t>(i) * n + from + len,
              out.begin() + static_cast<std::size_t>(i) * len);
  return Tensor::op({m, len}, std::move(out), {x},
                    [x, from, len, m, n](const std::vector<double>& gy,
                                         GradSink& sink) {
                      if (double* gx = sink.grad(x))
                        for (int i = 0; i < m; ++i)
                          for (int j = 0; j < len; ++j)
                            gx[static_cast<std::size_t>(i) * n + from + j] +=
                                gy[static_cast<std::size_t>(i) * len + j];
                    });
}

Tensor sum_all(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return Tensor::op({1}, {s}, {x},
                    [x](const std::vector<double>& gy, GradSink& sink) {
                      if (double* gx = sink.grad(x))
                        for (std::int64_t i = 0; i < x.numel(); ++i)
                          gx[i] += gy[0];
                    });
}

Tensor row_sums(const Tensor& x) {
  require_rank(x, 2, "row_sums");
  const int m = x.rows(), n = x.cols();
  std::vector<double> out(m, 0.0);
  const auto& xv = x.values();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[i] += xv[static_cast<std::size_t>(i) * n + j];
  return Tensor::op({m}, std::move(out), {x},
                    [x, m, n](const std::vector<double>& gy, GradSink& sink) {
                      if (double* gx = sink.grad(x))
                        for (int i = 0; i < m; ++i)
                          for (int j = 0; j < n; ++j)
                            gx[static_cast<std::size_t>(i) * n + j] += gy[i];
                    });
}

Tensor rowwise_logsumexp_masked(const Tensor& x,
                                const std::vector<std::uint8_t>& mask) {
  require_rank(x, 2, "rowwise_logsumexp_masked");
  const int m = x.rows(), n = x.cols();
  if (static_cast<std::int64_t>(mask.size()) != x.numel())
    throw DimensionError("rowwise_logsumexp_masked: mask size mismatch");

  const auto& xv = x.values();
  std::vector<double> out(m, 0.0);
  for (int i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j)
      if (mask[static_cast<std::size_t>(i) * n + j])
        mx = std::max(mx, xv[static_cast<std::size_t>(i) * n + j]);
    if (!std::isfinite(mx)) continue;  // empty row
    double s = 0.0;
    for (int j = 0; j < n; ++j)
      if (mask[static_cast<std::size_t>(i) * n + j])
        s += std::exp(xv[static_cast<std::size_t>(i) * n + j] - mx);
    out[i] = mx + std::log(s);
  }
  std::vector<double> y = out;
  return Tensor::op(
      {m}, std::move(out), {x},
      [x, mask, y, m, n](const std::vector<double>& gy, GradSink& sink) {
        double* gx = sink.grad(x);
        if (!gx) return;
        const auto& xv2 = x.values();
        for (int i = 0; i < m; ++i) {
          bool any = false;
          for (int j = 0; j < n; ++j)
            any = any || mask[static_cast<std::size_t>(i) * n + j];
          if (!any) continue;
          for (int j = 0; j < n; ++j) {
            const std::size_t idx = static_cast<std::size_t>(i) * n + j;
            if (mask[idx]) gx[idx] += gy[i] * std::exp(xv2[idx] - y[i]);
          }
        }
      });
}

Tensor l2_normalize_rows(const Tensor& x, double eps) {
  require_rank(x, 2, "l2_normalize_rows");
  const int m = x.rows(), n = x.cols();
  const auto& xv = x.values();
  std::vector<double> norms(m);
  std::vector<double> out(x.numel());
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      double v = xv[static_cast<std::size_t>(i) * n + j];
      s += v * v;
    }
    norms[i] = std::max(std::sqrt(s), eps);
    for (int j = 0; j < n; ++j)
      out[static_cast<std::size_t>(i) * n + j] =
          xv[static_cast<std::size_t>(i) * n + j] / norms[i];
  }
  std::vector<double> y = out;
  return Tensor::op(
      {m, n}, std::move(out), {x},
      [x, y, norms, m, n](const std::vector<double>& gy, GradSink& sink) {
        double* gx = sink.grad(x);
        if (!gx) return;
        for (int i = 0; i < m; ++i) {
          const double* yr = y.data() + static_cast<std::size_t>(i) * n;
          const double* gr = gy.data() + static_cast<std::size_t>(i) * n;
          double dot = 0.0;
          for (int j = 0; j < n; ++j) dot += gr[j] * yr[j];
          double* gxr = gx + static_cast<std::size_t>(i) * n;
          for (int j = 0; j < n; ++j)
            gxr[j] += (gr[j] - yr[j] * dot) / norms[i];
        }
      });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v,
                 int heads) {
  require_rank(q, 2, "attention");
  require_rank(k, 2, "attention");
  require_rank(v, 2, "attention");
  const int d = q.cols();
  if (k.cols() != d || v.cols() != d)
    throw DimensionError("attention: q/k/v feature extents differ: " +
                         shape_str(q.shape()) + ", " + shape_str(k.shape()) +
                         ", " + shape_str(v.shape()));
  if (k.rows() != v.rows())
    throw DimensionError("attention: k and v row counts differ: " +
                         shape_str(k.shape()) + " vs " + shape_str(v.shape()));
  if (heads < 1 || d % heads != 0)
    throw ConfigError("attention: feature extent " + std::to_string(d) +
                      " not divisible by heads " + std::to_string(heads));
  const int dh = d / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, dh);
    Tensor kh = slice_cols(k, h * dh, dh);
    Tensor vh = slice_cols(v, h * dh, dh);
    Tensor scores = scale(matmul(qh, transpose(kh)), inv_scale);
    outs.push_back(matmul(softmax_last(scores), vh));
  }
  return heads == 1 ? outs[0] : concat_cols(outs);
}

}  // namespace refdense
