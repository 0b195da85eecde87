#include "crda/ddg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crda {

void DdgConfig::validate() const {
  if (!(delta > 0.0)) throw std::invalid_argument("ddg: delta must be positive");
  if (!(effective_eta() > 0.0)) throw std::invalid_argument("ddg: eta must be positive");
  if (steps < 1) throw std::invalid_argument("ddg: n must be at least 1");
}

namespace {

struct Objective {
  double value;
  Tensor input_grad;
};

Objective evaluate(const Model& student, const TransferLossKind& trans, const Tensor& x, const Tensor& zs,
                   std::span<const double> gammas, bool want_grad) {
  if (!want_grad) {
    return {transfer_loss(trans, zs, student.forward_features(x), gammas).value, Tensor()};
  }
  const ForwardPass pass = student.forward(x, false);
  PairLossGrad tl = transfer_loss(trans, zs, pass.features(), gammas);
  Gradients g = student.backward(pass, &tl.grad_target, nullptr, true);
  if (!g.input->all_finite()) throw NumericError("ddg: non-finite input gradient (diverged model?)");
  return {tl.value, std::move(*g.input)};
}

}  // namespace

DdgBatch generate(const Model& student, const TransferLossKind& trans, const Tensor& x_t, const Tensor& zs_source,
                  const DdgConfig& cfg, Rng& rng) {
  cfg.validate();
  trans.validate();
  if (x_t.rank() != 4) throw DimensionError("ddg: expected an N x C x H x W batch, got " + shape_string(x_t.shape()));
  if (zs_source.rank() != 2 || zs_source.dim(1) != student.feature_dim()) {
    throw DimensionError("ddg: source features " + shape_string(zs_source.shape()) +
                         " do not match student feature dim " + std::to_string(student.feature_dim()));
  }
  for (double v : x_t.data())
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("ddg: target pixel outside [0,1]");

  const double delta = cfg.delta, eta = cfg.effective_eta();
  std::vector<double> gammas;
  if (trans.kind == TransferKind::kMmd) {
    gammas = median_heuristic_gammas(zs_source, student.forward_features(x_t), trans.bandwidths);
  }

  auto project = [&](Tensor& x) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double lo = std::max(0.0, x_t[i] - delta), hi = std::min(1.0, x_t[i] + delta);
      x[i] = std::clamp(x[i], x_t[i] - delta, x_t[i] + delta);
      x[i] = std::clamp(x[i], lo, hi);
    }
  };

  DdgBatch out;
  out.originals = x_t;
  Tensor x = x_t;
  if (cfg.random_start) {
    for (double& v : x.data()) v += rng.uniform(-delta, delta);
    project(x);
  }
  bool first = true;
  for (int k = 0; k < cfg.steps; ++k) {
    Objective obj = evaluate(student, trans, x, zs_source, gammas, true);
    if (first && !cfg.random_start) out.trans_loss_before = obj.value;
    first = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double g = obj.input_grad[i];
      const double s = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
      x[i] += eta * s;
    }
    project(x);
  }
  if (cfg.random_start) out.trans_loss_before = evaluate(student, trans, x_t, zs_source, gammas, false).value;
  out.trans_loss_after = evaluate(student, trans, x, zs_source, gammas, false).value;
  out.generated = std::move(x);
  return out;
}

double edge_fraction(const DdgBatch& batch, const DdgConfig& cfg) {
  if (batch.generated.shape() != batch.originals.shape() || batch.generated.empty()) {
    throw DimensionError("edge_fraction: malformed batch");
  }
  std::size_t at_edge = 0;
  for (std::size_t i = 0; i < batch.generated.size(); ++i)
    if (std::abs(batch.generated[i] - batch.originals[i]) >= 0.99 * cfg.delta) ++at_edge;
  return static_cast<double>(at_edge) / static_cast<double>(batch.generated.size());
}

}  // namespace crda
