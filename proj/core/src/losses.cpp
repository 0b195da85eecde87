#include "crda/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace crda {

namespace {

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

// Mean kernel value over all (a_i, b_j) pairs; adds d(mean)/da_i * scale_a
// into grad_a and likewise for b. Either gradient may be null.
double kernel_mean(const Tensor& a, const Tensor& b, std::span<const double> gammas, double scale,
                   Tensor* grad_a, Tensor* grad_b) {
  const std::size_t na = a.dim(0), nb = b.dim(0), d = a.dim(1);
  const double inv = 1.0 / static_cast<double>(na * nb);
  double total = 0.0;
  for (std::size_t i = 0; i < na; ++i) {
    auto ai = a.row(i);
    for (std::size_t j = 0; j < nb; ++j) {
      auto bj = b.row(j);
      const double dist = squared_distance(ai, bj);
      double k = 0.0, dk = 0.0;  // dk = dK/d(dist)
      for (double g : gammas) {
        const double e = std::exp(-g * dist);
        k += e;
        dk -= g * e;
      }
      total += k;
      if (grad_a || grad_b) {
        const double coeff = scale * inv * dk * 2.0;
        for (std::size_t c = 0; c < d; ++c) {
          const double diff = ai[c] - bj[c];
          if (grad_a) grad_a->at(i, c) += coeff * diff;
          if (grad_b) grad_b->at(j, c) -= coeff * diff;
        }
      }
    }
  }
  return total * inv;
}

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw DimensionError(std::string(what) + " must be a matrix, got " + shape_string(t.shape()));
}

struct AnchorPair {
  std::size_t anchor;
  std::size_t positive;
};

// Weighted sum of sim_loss over anchor/positive pairs of Z, with the exact
// gradient w.r.t. every row of Z written to `grad` when non-null.
double pair_contrastive(const Tensor& z, std::span<const AnchorPair> pairs, double tau, double weight, Tensor* grad) {
  const std::size_t n = z.dim(0), d = z.dim(1);
  std::vector<double> norms(n);
  Tensor u(z.shape());
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (double v : z.row(r)) s += v * v;
    norms[r] = std::sqrt(s);
    if (!(norms[r] > 0.0)) throw std::invalid_argument("contrastive loss: zero-norm feature row");
    for (std::size_t c = 0; c < d; ++c) u.at(r, c) = z.at(r, c) / norms[r];
  }
  Tensor du;
  if (grad) du = Tensor(z.shape(), 0.0);

  double total = 0.0;
  std::vector<double> logits(n);
  std::vector<double> sims(n);
  for (const AnchorPair& p : pairs) {
    if (p.anchor == p.positive) throw std::invalid_argument("sim_loss: anchor and positive are the same row");
    std::vector<double> others;
    others.reserve(n - 1);
    for (std::size_t k = 0; k < n; ++k) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += u.at(p.anchor, c) * u.at(k, c);
      sims[k] = s;
      if (k != p.anchor) others.push_back(s / tau);
    }
    const double lse = log_sum_exp(others);
    total += weight * (lse - sims[p.positive] / tau);
    if (!grad) continue;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == p.anchor) continue;
      double g = std::exp(sims[k] / tau - lse);
      if (k == p.positive) g -= 1.0;
      g *= weight / tau;  // dL/dS_{anchor,k}
      for (std::size_t c = 0; c < d; ++c) {
        du.at(p.anchor, c) += g * u.at(k, c);
        du.at(k, c) += g * u.at(p.anchor, c);
      }
    }
  }
  if (grad) {
    *grad = Tensor(z.shape(), 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += u.at(r, c) * du.at(r, c);
      for (std::size_t c = 0; c < d; ++c) grad->at(r, c) = (du.at(r, c) - u.at(r, c) * dot) / norms[r];
    }
  }
  return total;
}

}  // namespace

LossGrad cls_loss(const Tensor& logits, std::span<const std::uint32_t> labels) {
  require_matrix(logits, "logits");
  const std::size_t n = logits.dim(0), s = logits.dim(1);
  if (labels.size() != n) throw DimensionError("cls_loss: label count does not match logits rows");
  LossGrad out{0.0, Tensor(logits.shape(), 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= s) {
      throw std::invalid_argument("cls_loss: label " + std::to_string(labels[i]) + " out of range for " +
                                  std::to_string(s) + " classes");
    }
    auto row = logits.row(i);
    const double lse = log_sum_exp(row);
    out.value += lse - row[labels[i]];
    for (std::size_t k = 0; k < s; ++k) out.grad.at(i, k) = std::exp(row[k] - lse) / static_cast<double>(n);
    out.grad.at(i, labels[i]) -= 1.0 / static_cast<double>(n);
  }
  out.value /= static_cast<double>(n);
  return out;
}

std::vector<double> median_heuristic_gammas(const Tensor& zs, const Tensor& zt, std::span<const double> multipliers) {
  const Tensor all = concat_rows(zs, zt);
  std::vector<double> d2;
  for (std::size_t i = 0; i < all.dim(0); ++i)
    for (std::size_t j = i + 1; j < all.dim(0); ++j) d2.push_back(squared_distance(all.row(i), all.row(j)));
  double median = 1.0;
  if (!d2.empty()) {
    auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
    std::nth_element(d2.begin(), mid, d2.end());
    median = *mid;
  }
  if (!(median > 1e-12)) median = 1.0;
  std::vector<double> gammas;
  for (double m : multipliers) gammas.push_back(m / median);
  return gammas;
}

PairLossGrad mmd2(const Tensor& zs, const Tensor& zt, std::span<const double> gammas) {
  require_matrix(zs, "source features");
  require_matrix(zt, "target features");
  if (zs.dim(1) != zt.dim(1)) {
    throw DimensionError("mmd2 feature dims differ: " + shape_string(zs.shape()) + " vs " + shape_string(zt.shape()));
  }
  if (gammas.empty()) throw std::invalid_argument("mmd2 needs at least one bandwidth");
  for (double g : gammas)
    if (!(g > 0.0)) throw std::invalid_argument("mmd2 bandwidths must be positive");
  PairLossGrad out{0.0, Tensor(zs.shape(), 0.0), Tensor(zt.shape(), 0.0)};
  out.value = kernel_mean(zs, zs, gammas, 1.0, &out.grad_source, &out.grad_source) +
              kernel_mean(zt, zt, gammas, 1.0, &out.grad_target, &out.grad_target) -
              2.0 * kernel_mean(zs, zt, gammas, -2.0, &out.grad_source, &out.grad_target);
  return out;
}

AdversarialResult adversarial_trans(const Tensor& zs, const Tensor& zt, const Model& disc, AdversarialMode mode) {
  require_matrix(zs, "source features");
  require_matrix(zt, "target features");
  if (disc.input_shape() != Shape{zs.dim(1)} || zs.dim(1) != zt.dim(1)) {
    throw DimensionError("discriminator input " + shape_string(disc.input_shape()) + " does not match features " +
                         shape_string(zs.shape()) + " / " + shape_string(zt.shape()));
  }
  if (disc.output_dim() != 1) throw DimensionError("discriminator must output a single logit");
  const std::size_t ns = zs.dim(0), nt = zt.dim(0);
  const double inv = 1.0 / static_cast<double>(ns + nt);
  AdversarialResult out;
  out.disc_grads = disc.zero_gradients();
  auto run = [&](const Tensor& z, double label, Tensor& grad_z) {
    const ForwardPass pass = disc.forward(z);
    const Tensor& logit = pass.logits();
    Tensor dlogit(logit.shape());
    for (std::size_t i = 0; i < logit.size(); ++i) {
      const double a = logit[i];
      // BCE with logits: softplus(a) - label * a, computed stably.
      const double softplus = a > 0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
      out.value += (softplus - label * a) * inv;
      const double sig = 1.0 / (1.0 + std::exp(-a));
      dlogit[i] = (sig - label) * inv;
    }
    Gradients g = disc.backward(pass, nullptr, &dlogit, true);
    out.disc_grads.accumulate(g);
    grad_z = std::move(*g.input);
  };
  run(zs, 1.0, out.grad_source);
  run(zt, 0.0, out.grad_target);
  if (mode == AdversarialMode::kConfuse) {
    for (double& v : out.grad_source.data()) v = -v;
    for (double& v : out.grad_target.data()) v = -v;
  }
  return out;
}

void TransferLossKind::validate() const {
  if (kind == TransferKind::kMmd) {
    if (bandwidths.empty()) throw std::invalid_argument("MMD transfer loss needs at least one bandwidth");
    for (double b : bandwidths)
      if (!(b > 0.0)) throw std::invalid_argument("MMD bandwidths must be positive");
  } else {
    if (!discriminator) throw std::invalid_argument("adversarial transfer loss needs a discriminator");
    if (discriminator->output_dim() != 1) throw DimensionError("discriminator output dimension must be 1");
  }
}

PairLossGrad transfer_loss(const TransferLossKind& kind, const Tensor& zs, const Tensor& zt,
                           std::span<const double> gammas) {
  kind.validate();
  if (kind.kind == TransferKind::kMmd) {
    if (!gammas.empty()) return mmd2(zs, zt, gammas);
    const std::vector<double> g = median_heuristic_gammas(zs, zt, kind.bandwidths);
    return mmd2(zs, zt, g);
  }
  AdversarialResult r = adversarial_trans(zs, zt, *kind.discriminator, AdversarialMode::kConfuse);
  PairLossGrad out{-r.value, std::move(r.grad_source), std::move(r.grad_target)};
  for (double& v : out.grad_source.data()) v *= kind.reversal_weight;
  for (double& v : out.grad_target.data()) v *= kind.reversal_weight;
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!(na > 0.0 && nb > 0.0)) throw std::invalid_argument("cosine similarity of a zero-norm vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double sim_loss(std::size_t i, std::size_t j, const Tensor& z, const ContrastiveConfig& cfg) {
  require_matrix(z, "Z");
  if (!(cfg.tau > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (i == j) throw std::invalid_argument("sim_loss: i == j");
  if (i >= z.dim(0) || j >= z.dim(0) || z.dim(0) < 2) throw DimensionError("sim_loss: row index out of range");
  const AnchorPair p{i, j};
  return pair_contrastive(z, std::span<const AnchorPair>(&p, 1), cfg.tau, 1.0, nullptr);
}

LossGrad contrastive_loss(const Tensor& z_student, const Tensor& z_teacher, const ContrastiveConfig& cfg) {
  require_matrix(z_student, "student features");
  require_matrix(z_teacher, "teacher features");
  if (z_student.shape() != z_teacher.shape()) {
    throw DimensionError("contrastive_loss: student " + shape_string(z_student.shape()) + " vs teacher " +
                         shape_string(z_teacher.shape()));
  }
  if (!(cfg.tau > 0.0)) throw std::invalid_argument("temperature must be positive");
  const std::size_t n = z_student.dim(0);
  // Rows 0..N-1 are teacher features, N..2N-1 student features.
  const Tensor z = concat_rows(z_teacher, z_student);
  std::vector<AnchorPair> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    pairs.push_back({n + i, i});
    pairs.push_back({i, n + i});
  }
  Tensor grad_all;
  LossGrad out;
  out.value = pair_contrastive(z, pairs, cfg.tau, 1.0 / static_cast<double>(2 * n), &grad_all);
  out.grad = grad_all.slice_rows(n, 2 * n);
  return out;
}

LossReport total_loss(double cls, double trans, double con, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  return LossReport{cls, trans, con, cls + trans + lambda * con, lambda};
}

}  // namespace crda
