#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crda/corruptions.hpp"
#include "crda/dataset.hpp"
#include "crda/losses.hpp"
#include "crda/nn.hpp"
#include "crda/rng.hpp"
#include "crda/trainer.hpp"

namespace crda {

/// Spearman rank correlation with average ranks for ties. Returns 0 when
/// either input is constant (the correlation is undefined there).
double spearman(std::span<const double> x, std::span<const double> y);

/// One kind's measured quantity at severities 1..5, with the clean anchor.
struct KindCurve {
  CorruptionKind kind;
  double anchor = 0.0;  // quantity at t = 0
  std::array<double, kMaxSeverity> values{};
  double rho = 0.0;     // Spearman of values against t = 1..5
  bool monotone = false;
  /// Second per-kind check: t=5 shift containment (assumption 1) or the
  /// corrupted-vs-clean premise (assumption 3). Unused for assumption 2.
  bool secondary = false;
  double premise_fraction = 0.0;  // assumption 3 only
};

struct MonotonicityReport {
  std::string quantity;  // shift, feature_distance or transfer_loss
  std::vector<KindCurve> kinds;
  std::size_t monotone_passes = 0;
  std::size_t secondary_passes = 0;
  bool aggregate_pass = false;
  /// Set when the model scores near chance on the corpus.
  bool flagged_untrained = false;
  double premise_fraction = 0.0;  // assumption 3: mean over kinds at t = 5
};

struct Assumption1Thresholds {
  double rho = 0.9;
  double max_shift = 0.30;
  std::size_t monotone_kinds = 13;
  std::size_t contained_kinds = 12;
};

/// Average-shift profile per kind; passes at rho >= 0.9 and t=5 shift
/// <= 0.30, aggregated as >= 13/15 and >= 12/15. Needs >= 32 images.
MonotonicityReport check_assumption1(const LabeledDataset& corpus, const Rng& rng,
                                     const Assumption1Thresholds& th = {},
                                     const SeverityTable& table = SeverityTable::defaults());

/// Mean L2 feature distance ||f(t(x)) - f(x)|| per kind and t; passes at
/// rho >= 0.8, aggregated as >= `min_kinds` of 15.
MonotonicityReport check_assumption2(const Model& model, const LabeledDataset& corpus, const Rng& rng,
                                     std::size_t min_kinds = 12);

/// Transfer loss between source features and corrupted-target features per
/// kind and t, averaged over target batches of `batch` images. MMD kernels
/// are fixed from the clean features. Passes at rho >= 0.8, aggregated as
/// >= `min_kinds`; the premise fraction counts batches whose t=5 loss is at
/// least the clean loss.
MonotonicityReport check_assumption3(const Model& model, const DomainPair& pair, const Rng& rng,
                                     const TransferLossKind& trans = {}, std::size_t batch = 100,
                                     std::size_t min_kinds = 11);

enum class RegimeTag { kClean, kAllLevels, kCleanPlusLevel5, kLevel5 };
inline constexpr std::array<RegimeTag, 4> kAllRegimes = {RegimeTag::kClean, RegimeTag::kAllLevels,
                                                         RegimeTag::kCleanPlusLevel5, RegimeTag::kLevel5};
std::string_view regime_name(RegimeTag tag);
/// Severities sampled by a regime during training; empty for kClean.
std::vector<int> regime_severities(RegimeTag tag);

struct OrderStudyConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double lambda = 0.5;
  double tau = 0.2;
  std::size_t feature_dim = 64;
};

struct RegimeCurve {
  RegimeTag regime;
  std::array<double, kMaxSeverity + 1> distance{};  // t = 0..5
  double rho = 0.0;                                 // Spearman over t = 0..5
  std::uint64_t init_hash = 0;
  double clean_accuracy = 0.0;
};

/// Trains one model per regime on a single domain: supervised loss on clean
/// images plus, except for kClean, a contrastive term pulling f(t(x)) toward
/// the detached f(x) with t drawn from the regime's severities. All regimes
/// share init and data order. Returns d_f(t) = mean ||f(t(x)) - f(x)||.
std::vector<RegimeCurve> order_invariance_study(const LabeledDataset& domain, CorruptionKind kind, const Rng& rng,
                                                const OrderStudyConfig& cfg = {});

struct AblationPoint {
  double delta;
  std::optional<double> eta;  // unset: 2 * delta + 1/255
  int n;
};

struct AblationRow {
  double delta;
  double eta;
  int n;
  double mce;
  double clean_acc;
};

/// Trains reference and teacher once, then a DDG student per grid point,
/// and reports student mCE against the reference plus clean accuracy.
std::vector<AblationRow> ablation_sweep(const DomainPair& pair, const ExperimentConfig& base,
                                        std::span<const AblationPoint> grid);

/// delta,eta,n,mCE,clean_acc
std::string ablation_csv(std::span<const AblationRow> rows);
/// quantity,kind,t0,t1,t2,t3,t4,t5,rho,monotone,secondary
std::string assumptions_csv(std::span<const MonotonicityReport> reports);
/// regime,t,distance
std::string order_study_csv(std::span<const RegimeCurve> curves);

}  // namespace crda
