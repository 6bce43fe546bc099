#include "bppo/ops.hpp"

#include <algorithm>
#include <cmath>

#include "bppo/error.hpp"

namespace bppo::ops {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() +
                     " vs " + b.shape_str());
  }
}

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = a;
  for (double& v : out.data) v *= c;
  return out;
}

Tensor add_scalar(const Tensor& a, double c) {
  Tensor out = a;
  for (double& v : out.data) v += c;
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul: incompatible shapes " + a.shape_str() + " x " +
                     b.shape_str());
  }
  const int64_t n = a.rows(), k = a.cols(), m = b.cols();
  Tensor out = Tensor::zeros({n, m});
  // fixed i-k-j order; the inner accumulation over k runs left to right
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int64_t kk = 0; kk < k; ++kk) {
        acc += a.data[static_cast<size_t>(i * k + kk)] *
               b.data[static_cast<size_t>(kk * m + j)];
      }
      out.data[static_cast<size_t>(i * m + j)] = acc;
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.ndim() != 2) throw ShapeError("transpose: need matrix, got " + a.shape_str());
  const int64_t n = a.rows(), m = a.cols();
  Tensor out = Tensor::zeros({m, n});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < m; ++j)
      out.data[static_cast<size_t>(j * n + i)] = a.data[static_cast<size_t>(i * m + j)];
  return out;
}

void softmax_row_inplace(std::span<double> row) {
  double m = row[0];
  for (double v : row) m = std::max(m, v);
  double z = 0.0;
  for (double& v : row) {
    v = std::exp(v - m);
    z += v;
  }
  for (double& v : row) v /= z;
}

void log_softmax_row_inplace(std::span<double> row) {
  double m = row[0];
  for (double v : row) m = std::max(m, v);
  double z = 0.0;
  for (double v : row) z += std::exp(v - m);
  const double lz = std::log(z);
  for (double& v : row) v = v - m - lz;
}

Tensor row_softmax(const Tensor& a) {
  if (a.ndim() != 2) throw ShapeError("row_softmax: need matrix, got " + a.shape_str());
  Tensor out = a;
  const int64_t m = a.cols();
  for (int64_t i = 0; i < a.rows(); ++i) {
    softmax_row_inplace(std::span<double>(out.data.data() + i * m, static_cast<size_t>(m)));
  }
  return out;
}

Tensor log_softmax(const Tensor& a) {
  if (a.ndim() != 2) throw ShapeError("log_softmax: need matrix, got " + a.shape_str());
  Tensor out = a;
  const int64_t m = a.cols();
  for (int64_t i = 0; i < a.rows(); ++i) {
    log_softmax_row_inplace(std::span<double>(out.data.data() + i * m, static_cast<size_t>(m)));
  }
  return out;
}

Tensor vlog(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data) v = std::log(v);
  return out;
}

Tensor vexp(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data) v = std::exp(v);
  return out;
}

double gelu_scalar(double x) {
  // x * Phi(x) with the exact normal CDF
  return 0.5 * x * std::erfc(-x / kSqrt2);
}

double gelu_grad_scalar(double x) {
  const double phi_cdf = 0.5 * std::erfc(-x / kSqrt2);
  const double phi_pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
  return phi_cdf + x * phi_pdf;
}

Tensor gelu(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data) v = gelu_scalar(v);
  return out;
}

Tensor rms_norm(const Tensor& x, const Tensor& gain, const Tensor& offset, double eps) {
  if (x.ndim() != 2) throw ShapeError("rms_norm: need matrix, got " + x.shape_str());
  const int64_t n = x.rows(), d = x.cols();
  if (gain.ndim() != 1 || gain.shape[0] != d || offset.ndim() != 1 || offset.shape[0] != d) {
    throw ShapeError("rms_norm: gain/offset must be [d]");
  }
  Tensor out = Tensor::zeros({n, d});
  for (int64_t i = 0; i < n; ++i) {
    double ss = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      const double v = x.data[static_cast<size_t>(i * d + j)];
      ss += v * v;
    }
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(d) + eps);
    for (int64_t j = 0; j < d; ++j) {
      out.data[static_cast<size_t>(i * d + j)] =
          x.data[static_cast<size_t>(i * d + j)] * inv * gain.data[static_cast<size_t>(j)] +
          offset.data[static_cast<size_t>(j)];
    }
  }
  return out;
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
  if (table.ndim() != 2) throw ShapeError("embedding: table must be a matrix");
  const int64_t v = table.rows(), d = table.cols();
  Tensor out = Tensor::zeros({static_cast<int64_t>(ids.size()), d});
  for (size_t i = 0; i < ids.size(); ++i) {
    const int id = ids[i];
    if (id < 0 || id >= v) {
      throw ShapeError("embedding: id " + std::to_string(id) + " out of range");
    }
    std::copy_n(table.data.begin() + static_cast<int64_t>(id) * d, d,
                out.data.begin() + static_cast<int64_t>(i) * d);
  }
  return out;
}

Tensor slice_rows(const Tensor& a, int64_t r0, int64_t r1) {
  if (a.ndim() != 2 || r0 < 0 || r1 < r0 || r1 > a.rows()) {
    throw ShapeError("slice_rows: bad range");
  }
  const int64_t m = a.cols();
  Tensor out = Tensor::zeros({r1 - r0, m});
  std::copy_n(a.data.begin() + r0 * m, (r1 - r0) * m, out.data.begin());
  return out;
}

Tensor slice_cols(const Tensor& a, int64_t c0, int64_t c1) {
  if (a.ndim() != 2 || c0 < 0 || c1 < c0 || c1 > a.cols()) {
    throw ShapeError("slice_cols: bad range");
  }
  const int64_t n = a.rows(), m = a.cols(), w = c1 - c0;
  Tensor out = Tensor::zeros({n, w});
  for (int64_t i = 0; i < n; ++i) {
    std::copy_n(a.data.begin() + i * m + c0, w, out.data.begin() + i * w);
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ShapeError("concat_cols: empty input");
  const int64_t n = xs[0].rows();
  int64_t total = 0;
  for (const Tensor& t : xs) {
    if (t.ndim() != 2 || t.rows() != n) throw ShapeError("concat_cols: row mismatch");
    total += t.cols();
  }
  Tensor out = Tensor::zeros({n, total});
  for (int64_t i = 0; i < n; ++i) {
    int64_t off = 0;
    for (const Tensor& t : xs) {
      const int64_t w = t.cols();
      std::copy_n(t.data.begin() + i * w, w, out.data.begin() + i * total + off);
      off += w;
    }
  }
  return out;
}

Tensor masked_fill(const Tensor& a, const Tensor& keep, double fill) {
  require_same_shape(a, keep, "masked_fill");
  Tensor out = a;
  for (size_t i = 0; i < out.data.size(); ++i) {
    if (keep.data[i] == 0.0) out.data[i] = fill;
  }
  return out;
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data) acc += v;
  return Tensor::scalar(acc);
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean: empty tensor");
  double acc = 0.0;
  for (double v : a.data) acc += v;
  return Tensor::scalar(acc / static_cast<double>(a.numel()));
}

Tensor min_elem(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "min_elem");
  Tensor out = a;
  for (size_t i = 0; i < out.data.size(); ++i) {
    // ties resolve to the first argument
    out.data[i] = b.data[i] < a.data[i] ? b.data[i] : a.data[i];
  }
  return out;
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (lo > hi) throw ShapeError("clamp: lo > hi");
  Tensor out = a;
  for (double& v : out.data) v = std::min(std::max(v, lo), hi);
  return out;
}

Tensor gather(const Tensor& a, const std::vector<std::pair<int64_t, int64_t>>& coords) {
  if (a.ndim() != 2) throw ShapeError("gather: need matrix");
  Tensor out = Tensor::zeros({static_cast<int64_t>(coords.size())});
  for (size_t i = 0; i < coords.size(); ++i) {
    out.data[i] = a.at(coords[i].first, coords[i].second);
  }
  return out;
}

}  // namespace bppo::ops
