#include "crda/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "crda/rng.hpp"

namespace crda {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (std::size_t d : shape_) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_string(shape_));
  }
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::size_t d : shape_) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_string(shape_));
  }
  if (data_.size() != shape_size(shape_)) {
    throw DimensionError("data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
  }
}

std::size_t Tensor::row_size() const {
  if (shape_.empty()) return 0;
  return data_.size() / shape_[0];
}

std::span<double> Tensor::row(std::size_t i) {
  const std::size_t n = row_size();
  return std::span<double>(data_).subspan(i * n, n);
}

std::span<const double> Tensor::row(std::size_t i) const {
  const std::size_t n = row_size();
  return std::span<const double>(data_).subspan(i * n, n);
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
  if (shape_.empty() || begin >= end || end > shape_[0]) {
    throw DimensionError("bad row slice [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") of " + shape_string(shape_));
  }
  Shape s = shape_;
  s[0] = end - begin;
  const std::size_t n = row_size();
  return Tensor(std::move(s), std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * n),
                                                  data_.begin() + static_cast<std::ptrdiff_t>(end * n)));
}

Tensor Tensor::gather_rows(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw DimensionError("gather_rows with no indices");
  Shape s = shape_;
  s[0] = indices.size();
  const std::size_t n = row_size();
  std::vector<double> out;
  out.reserve(indices.size() * n);
  for (std::size_t idx : indices) {
    if (idx >= shape_[0]) throw DimensionError("row index out of range for " + shape_string(shape_));
    auto r = row(idx);
    out.insert(out.end(), r.begin(), r.end());
  }
  return Tensor(std::move(s), std::move(out));
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

namespace {

double apply_op(ElementwiseOp op, double a, double b) {
  switch (op) {
    case ElementwiseOp::kAdd: return a + b;
    case ElementwiseOp::kSub: return a - b;
    case ElementwiseOp::kMul: return a * b;
    case ElementwiseOp::kDiv: return a / b;
    case ElementwiseOp::kMax: return std::max(a, b);
    case ElementwiseOp::kMin: return std::min(a, b);
  }
  return 0.0;
}

void require_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) throw NumericError(std::string(what) + " produced a non-finite value");
}

}  // namespace

Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("shape mismatch: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply_op(op, a[i], b[i]);
  require_finite(out, "elementwise");
  return out;
}

Tensor elementwise(ElementwiseOp op, const Tensor& a, double b) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply_op(op, a[i], b);
  require_finite(out, "elementwise");
  return out;
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo must not exceed hi");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::clamp(x[i], lo, hi);
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul inner dimension mismatch: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.raw() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a.raw()[i * k + p];
      const double* brow = b.raw() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  require_finite(out, "matmul");
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("transpose needs a matrix, got " + shape_string(a.shape()));
  Tensor out({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor gaussian(Rng& rng, Shape shape, double mean, double std) {
  if (std < 0.0) throw std::invalid_argument("gaussian: negative std");
  Tensor out(std::move(shape), mean);
  if (std == 0.0) return out;
  for (double& v : out.data()) v = mean + std * rng.normal();
  return out;
}

Tensor uniform(Rng& rng, Shape shape, double lo, double hi) {
  Tensor out(std::move(shape));
  for (double& v : out.data()) v = rng.uniform(lo, hi);
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("shape mismatch: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.rank() == 0 || a.rank() != b.rank() ||
      !std::equal(a.shape().begin() + 1, a.shape().end(), b.shape().begin() + 1)) {
    throw DimensionError("concat_rows mismatch: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  Shape s = a.shape();
  s[0] += b.dim(0);
  std::vector<double> d(a.data().begin(), a.data().end());
  d.insert(d.end(), b.data().begin(), b.data().end());
  return Tensor(std::move(s), std::move(d));
}

}  // namespace crda
