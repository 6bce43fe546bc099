#include "bppo/tensor.hpp"

#include <cmath>
#include <sstream>

#include "bppo/error.hpp"

namespace bppo {

int64_t shape_numel(const std::vector<int64_t>& shp) {
  int64_t n = 1;
  for (int64_t d : shp) {
    if (d < 0) throw ShapeError("negative dimension in shape");
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<int64_t> shp, std::vector<double> vals)
    : shape(std::move(shp)), data(std::move(vals)) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
    throw ShapeError("tensor data size does not match shape " + shape_str());
  }
}

Tensor Tensor::zeros(std::vector<int64_t> shp) {
  const int64_t n = shape_numel(shp);
  return Tensor(std::move(shp), std::vector<double>(static_cast<size_t>(n), 0.0));
}

Tensor Tensor::full(std::vector<int64_t> shp, double value) {
  const int64_t n = shape_numel(shp);
  return Tensor(std::move(shp), std::vector<double>(static_cast<size_t>(n), value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::row_vector(std::vector<double> vals) {
  const int64_t n = static_cast<int64_t>(vals.size());
  return Tensor({1, n}, std::move(vals));
}

Tensor Tensor::vector(std::vector<double> vals) {
  const int64_t n = static_cast<int64_t>(vals.size());
  return Tensor({n}, std::move(vals));
}

int64_t Tensor::rows() const {
  if (ndim() != 2) throw ShapeError("rows() on non-matrix " + shape_str());
  return shape[0];
}

int64_t Tensor::cols() const {
  if (ndim() != 2) throw ShapeError("cols() on non-matrix " + shape_str());
  return shape[1];
}

double& Tensor::at(int64_t r, int64_t c) {
  if (ndim() != 2 || r < 0 || r >= shape[0] || c < 0 || c >= shape[1]) {
    throw ShapeError("at(" + std::to_string(r) + "," + std::to_string(c) +
                     ") out of range for " + shape_str());
  }
  return data[static_cast<size_t>(r * shape[1] + c)];
}

double Tensor::at(int64_t r, int64_t c) const {
  return const_cast<Tensor*>(this)->at(r, c);
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

void ensure_finite(const Tensor& t, const char* op) {
  for (double v : t.data) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value produced by op '") + op + "'");
    }
  }
}

}  // namespace bppo
