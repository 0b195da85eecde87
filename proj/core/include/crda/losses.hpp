#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "crda/nn.hpp"
#include "crda/tensor.hpp"

namespace crda {

/// Scalar loss with its gradient w.r.t. one input.
struct LossGrad {
  double value = 0.0;
  Tensor grad;
};

/// Scalar loss with gradients w.r.t. a source batch and a target batch.
struct PairLossGrad {
  double value = 0.0;
  Tensor grad_source;
  Tensor grad_target;
};

/// Mean softmax cross-entropy over N x S logits.
LossGrad cls_loss(const Tensor& logits, std::span<const std::uint32_t> labels);

/// 1 / median of pairwise squared distances over the stacked rows, times
/// each multiplier. Treated as a constant by the caller (no gradient).
std::vector<double> median_heuristic_gammas(const Tensor& zs, const Tensor& zt, std::span<const double> multipliers);

/// Biased (V-statistic) squared MMD with kernel sum_g exp(-g ||a - b||^2).
PairLossGrad mmd2(const Tensor& zs, const Tensor& zt, std::span<const double> gammas);

enum class AdversarialMode { kTrainDisc, kConfuse };

struct AdversarialResult {
  double value = 0.0;  // mean binary cross-entropy, source = 1, target = 0
  Tensor grad_source;  // feature-path gradients; negated under kConfuse
  Tensor grad_target;
  Gradients disc_grads;  // discriminator parameter gradients of the BCE
};

AdversarialResult adversarial_trans(const Tensor& zs, const Tensor& zt, const Model& disc, AdversarialMode mode);

enum class TransferKind { kMmd, kAdversarial };

/// Which discrepancy plays the role of the transfer loss.
struct TransferLossKind {
  TransferKind kind = TransferKind::kMmd;
  /// MMD: multipliers applied to the median-heuristic gamma.
  std::vector<double> bandwidths = {0.25, 1.0, 4.0};
  /// Adversarial: the domain discriminator (not owned) and the weight of
  /// the reversed gradient reaching the feature extractor.
  const Model* discriminator = nullptr;
  double reversal_weight = 1.0;

  void validate() const;
};

/// Transfer loss as minimised by the feature extractor (and maximised by
/// the discrepancy generator). MMD: mmd2. Adversarial: the negated
/// discriminator BCE, so its gradient is the reversed one.
/// `gammas` fixes the MMD kernels; when empty they are derived from
/// (zs, zt) by the median heuristic.
PairLossGrad transfer_loss(const TransferLossKind& kind, const Tensor& zs, const Tensor& zt,
                           std::span<const double> gammas = {});

struct ContrastiveConfig {
  double tau = 0.2;
};

/// Cosine similarity z_i^T z_j / (||z_i|| ||z_j||).
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// -log( exp(sim(z_i,z_j)/tau) / sum_{k != i} exp(sim(z_i,z_k)/tau) ) over
/// the rows of Z. i and j are row indices.
double sim_loss(std::size_t i, std::size_t j, const Tensor& z, const ContrastiveConfig& cfg);

/// (1/2N) sum_i [ sim_loss(stu_i, tea_i) + sim_loss(tea_i, stu_i) ] over
/// Z = Z_tea ∪ Z_stu. The gradient is w.r.t. Z_stu only.
LossGrad contrastive_loss(const Tensor& z_student, const Tensor& z_teacher, const ContrastiveConfig& cfg);

struct LossReport {
  double cls = 0.0;
  double trans = 0.0;
  double con = 0.0;
  double total = 0.0;
  double lambda = 0.5;
};

inline constexpr double kDefaultLambda = 0.5;

/// total = cls + trans + lambda * con.
LossReport total_loss(double cls, double trans, double con, double lambda = kDefaultLambda);

}  // namespace crda
