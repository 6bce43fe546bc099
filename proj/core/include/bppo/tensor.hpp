#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bppo {

// Dense row-major tensor of 64-bit floats. Shapes are explicit; there is no
// broadcasting anywhere in the library.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int64_t> shp, std::vector<double> vals);

  static Tensor zeros(std::vector<int64_t> shp);
  static Tensor full(std::vector<int64_t> shp, double value);
  static Tensor scalar(double value);
  static Tensor row_vector(std::vector<double> vals);   // shape [1, n]
  static Tensor vector(std::vector<double> vals);       // shape [n]

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int64_t ndim() const { return static_cast<int64_t>(shape.size()); }

  // 2-d accessors; require ndim() == 2
  int64_t rows() const;
  int64_t cols() const;
  double& at(int64_t r, int64_t c);
  double at(int64_t r, int64_t c) const;

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  std::string shape_str() const;
};

int64_t shape_numel(const std::vector<int64_t>& shp);

// Throws NumericError naming `op` if any element is NaN or infinite.
void ensure_finite(const Tensor& t, const char* op);

}  // namespace bppo
