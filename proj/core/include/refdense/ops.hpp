#pragma once

#include <cstdint>
#include <vector>

#include "refdense/tensor.hpp"

namespace refdense {

// Differentiable operations. All take tensors by value (cheap handles) and
// return fresh tensors; gradients flow to every parent that requires them.

Tensor matmul(const Tensor& a, const Tensor& b);  // (m,k)x(k,n) -> (m,n)
Tensor transpose(const Tensor& a);                // rank 2

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double c);
Tensor add_bias(const Tensor& a, const Tensor& bias);  // (m,n) + (n)

Tensor sigmoid(const Tensor& x);
Tensor softmax_last(const Tensor& x);  // softmax along the trailing axis
Tensor log(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor gelu(const Tensor& x);

// Per-row normalization over the trailing axis; gamma/beta have that extent.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// Temporal convolution, zero padding of floor(w/2) on both ends.
// x: (T,D), kernel: (w,D,Dout), odd w; output: (ceil(T/stride), Dout).
Tensor conv1d(const Tensor& x, const Tensor& kernel, int stride);

// Endpoint-aligned linear interpolation along rows: output row i samples
// input coordinate i*(t-1)/(target_len-1). t == 1 broadcasts; target_len == 1
// samples coordinate 0.
Tensor upsample_linear(const Tensor& x, int target_len);

Tensor concat_cols(const std::vector<Tensor>& parts);  // same row counts
Tensor slice_cols(const Tensor& x, int from, int len);

Tensor sum_all(const Tensor& x);   // -> (1)
Tensor row_sums(const Tensor& x);  // (m,n) -> (m)

// Row i of the result is log sum_{j : mask[i*n+j] != 0} exp(x[i,j]),
// max-shifted. Rows whose mask is empty yield 0 and receive no gradient.
Tensor rowwise_logsumexp_masked(const Tensor& x,
                                const std::vector<std::uint8_t>& mask);

// Rows scaled to unit L2 norm; norms are floored at eps.
Tensor l2_normalize_rows(const Tensor& x, double eps = 1e-12);

// Scaled dot-product attention, heads sliced from the trailing axis:
// per head, softmax(q k^T / sqrt(d/heads)) v, outputs re-concatenated.
// q: (Tq,d), k/v: (Tk,d); Tq and Tk may differ.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads);

}  // namespace refdense
