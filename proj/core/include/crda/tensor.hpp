#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace crda {

class Rng;

/// Raised when operand shapes are incompatible. The message names both shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation would produce a NaN or infinity.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major array of doubles. Tensors are plain values: copying
/// copies the data and there is no aliasing between instances.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* raw() { return data_.data(); }
  const double* raw() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// 2-D element access.
  double& at(std::size_t row, std::size_t col) { return data_[row * shape_[1] + col]; }
  double at(std::size_t row, std::size_t col) const { return data_[row * shape_[1] + col]; }

  /// Number of elements in one slice along axis 0.
  std::size_t row_size() const;
  std::span<double> row(std::size_t i);
  std::span<const double> row(std::size_t i) const;

  Tensor reshaped(Shape shape) const;
  /// Rows [begin, end) along axis 0.
  Tensor slice_rows(std::size_t begin, std::size_t end) const;
  /// Rows picked by index along axis 0, in the order given.
  Tensor gather_rows(std::span<const std::size_t> indices) const;

  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

enum class ElementwiseOp { kAdd, kSub, kMul, kDiv, kMax, kMin };

/// Exact-shape elementwise op. Throws DimensionError on mismatch and
/// NumericError if any result is non-finite.
Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b);
/// Scalar-broadcast elementwise op.
Tensor elementwise(ElementwiseOp op, const Tensor& a, double b);
Tensor clamp(const Tensor& x, double lo, double hi);

/// Matrix product with a fixed row-major, left-to-right summation order.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// Box-Muller normal samples. std == 0 yields the constant mean.
Tensor gaussian(Rng& rng, Shape shape, double mean, double std);
Tensor uniform(Rng& rng, Shape shape, double lo, double hi);

/// Largest absolute elementwise difference; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Row-stack tensors that share trailing dimensions.
Tensor concat_rows(const Tensor& a, const Tensor& b);

}  // namespace crda
