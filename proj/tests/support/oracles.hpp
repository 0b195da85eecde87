#pragma once

// Independent reference implementations, written for clarity rather than
// speed, that the library results are compared against.

#include <cmath>
#include <numeric>
#include <vector>

#include "crda/tensor.hpp"

namespace crda::testing {

inline double brute_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

/// Pair loss over rows: -log(e^{s(i,j)/tau} / sum_{k != i} e^{s(i,k)/tau}).
inline double brute_pair_loss(const std::vector<std::vector<double>>& z, std::size_t i, std::size_t j, double tau) {
  double denom = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k)
    if (k != i) denom += std::exp(brute_cosine(z[i], z[k]) / tau);
  return -std::log(std::exp(brute_cosine(z[i], z[j]) / tau) / denom);
}

/// Symmetric teacher-student contrastive loss over the 2N stacked rows.
inline double brute_contrastive(const Tensor& student, const Tensor& teacher, double tau) {
  const std::size_t n = student.dim(0), d = student.dim(1);
  std::vector<std::vector<double>> z;
  for (std::size_t i = 0; i < n; ++i) z.emplace_back(teacher.raw() + i * d, teacher.raw() + (i + 1) * d);
  for (std::size_t i = 0; i < n; ++i) z.emplace_back(student.raw() + i * d, student.raw() + (i + 1) * d);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += brute_pair_loss(z, n + i, i, tau) + brute_pair_loss(z, i, n + i, tau);
  return total / (2.0 * static_cast<double>(n));
}

inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor c({a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < b.dim(1); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.dim(1); ++k) s += a.at(i, k) * b.at(k, j);
      c.at(i, j) = s;
    }
  return c;
}

/// Average rank of each entry by counting smaller and equal elements.
inline std::vector<double> brute_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double v : x) {
      if (v < x[i]) ++less;
      if (v == x[i]) ++equal;
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

/// Pearson correlation of average ranks.
inline double brute_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const std::vector<double> rx = brute_ranks(x), ry = brute_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace crda::testing
