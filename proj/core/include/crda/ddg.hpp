#pragma once

#include <optional>

#include "crda/losses.hpp"
#include "crda/nn.hpp"
#include "crda/rng.hpp"
#include "crda/tensor.hpp"

namespace crda {

/// Domain discrepancy generator settings.
struct DdgConfig {
  /// L-infinity radius of the neighbourhood around each target image.
  double delta = 60.0 / 255.0;
  /// Step size. Unset means 2 * delta + 1/255, i.e. one step reaches the
  /// far edge of the ball from anywhere inside it.
  std::optional<double> eta;
  int steps = 2;
  bool random_start = false;

  double effective_eta() const { return eta.value_or(2.0 * delta + 1.0 / 255.0); }
  void validate() const;
};

struct DdgBatch {
  Tensor originals;
  Tensor generated;
  double trans_loss_before = 0.0;
  double trans_loss_after = 0.0;
};

/// Projected sign-gradient ascent on the transfer loss between the
/// student's features of the target batch and the fixed source features:
///
///   x_{k+1} = clip_[0,1]( clip_{x_t ± delta}( x_k + eta * sign(grad_x) ) )
///
/// Only the input moves; the student is read-only. sign(0) = 0. MMD kernel
/// bandwidths are fixed from the clean batch for all steps.
DdgBatch generate(const Model& student, const TransferLossKind& trans, const Tensor& x_t, const Tensor& zs_source,
                  const DdgConfig& cfg, Rng& rng);

/// Fraction of pixels with |generated - original| >= 0.99 * delta.
double edge_fraction(const DdgBatch& batch, const DdgConfig& cfg);

}  // namespace crda
