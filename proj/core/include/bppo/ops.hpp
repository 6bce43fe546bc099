#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "bppo/tensor.hpp"

// Forward kernels. Every reduction runs left-to-right in index order so
// results are bit-reproducible; the tape calls these same kernels, which keeps
// recorded and plain forward passes bitwise identical.
namespace bppo::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor row_softmax(const Tensor& a);   // max-subtracted, per row
Tensor log_softmax(const Tensor& a);   // per row, stable
Tensor vlog(const Tensor& a);
Tensor vexp(const Tensor& a);
Tensor gelu(const Tensor& a);          // exact Gaussian CDF form
Tensor rms_norm(const Tensor& x, const Tensor& gain, const Tensor& offset, double eps);
Tensor embedding(const Tensor& table, std::span<const int> ids);
Tensor slice_rows(const Tensor& a, int64_t r0, int64_t r1);  // half-open
Tensor slice_cols(const Tensor& a, int64_t c0, int64_t c1);
Tensor concat_cols(const std::vector<Tensor>& xs);
// keep is a same-shape 0/1 mask; positions with keep == 0 are replaced by fill
Tensor masked_fill(const Tensor& a, const Tensor& keep, double fill);
Tensor sum(const Tensor& a);    // scalar
Tensor mean(const Tensor& a);   // scalar
Tensor min_elem(const Tensor& a, const Tensor& b);  // ties take a
Tensor clamp(const Tensor& a, double lo, double hi);
// picks (row, col) entries of a matrix into a [n] vector
Tensor gather(const Tensor& a, const std::vector<std::pair<int64_t, int64_t>>& coords);

// Row helpers shared with the sampler so that sampling-time log-probs match
// tape-computed log-probs bit for bit.
void softmax_row_inplace(std::span<double> row);
void log_softmax_row_inplace(std::span<double> row);
double gelu_scalar(double x);
double gelu_grad_scalar(double x);

}  // namespace bppo::ops
