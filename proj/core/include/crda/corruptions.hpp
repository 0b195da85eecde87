#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "crda/dataset.hpp"
#include "crda/rng.hpp"
#include "crda/tensor.hpp"

namespace crda {

enum class CorruptionKind {
  kGaussianNoise,
  kShotNoise,
  kImpulseNoise,
  kDefocusBlur,
  kMotionBlur,
  kZoomBlur,
  kFog,
  kFrost,
  kSnow,
  kElasticTransform,
  kContrast,
  kBrightness,
  kJpegCompression,
  kPixelate,
  kGlassBlur,
};

inline constexpr std::size_t kCorruptionCount = 15;
inline constexpr std::size_t kMaxSeverity = 5;

inline constexpr std::array<CorruptionKind, kCorruptionCount> kAllCorruptions = {
    CorruptionKind::kGaussianNoise, CorruptionKind::kShotNoise,        CorruptionKind::kImpulseNoise,
    CorruptionKind::kDefocusBlur,   CorruptionKind::kMotionBlur,       CorruptionKind::kZoomBlur,
    CorruptionKind::kFog,           CorruptionKind::kFrost,            CorruptionKind::kSnow,
    CorruptionKind::kElasticTransform, CorruptionKind::kContrast,      CorruptionKind::kBrightness,
    CorruptionKind::kJpegCompression, CorruptionKind::kPixelate,       CorruptionKind::kGlassBlur,
};

inline std::size_t kind_index(CorruptionKind k) { return static_cast<std::size_t>(k); }

/// snake_case name used in file names and CSV columns, e.g. "gaussian_noise".
std::string_view corruption_name(CorruptionKind kind);
std::optional<CorruptionKind> parse_corruption(std::string_view name);

/// Severity t in 0..5; level 0 is the identity.
class Severity {
 public:
  explicit Severity(int t);
  int value() const { return t_; }
  friend bool operator==(Severity, Severity) = default;

 private:
  int t_;
};

/// Operator parameters for levels 1..5 of one kind. `primary` is the
/// parameter that controls distortion strength; `secondary` is only used by
/// kinds with a second knob (glass blur rounds, snow desaturation).
struct SeverityParams {
  double primary;
  double secondary;
};

struct SeverityTable {
  std::array<std::array<SeverityParams, kMaxSeverity>, kCorruptionCount> levels;

  const SeverityParams& at(CorruptionKind kind, Severity t) const;
  /// +1 when a larger primary parameter means more distortion, -1 otherwise.
  static int direction(CorruptionKind kind);
  static const SeverityTable& defaults();
};

/// Corrupts one C x H x W image in [0,1]. Output is clamped to [0,1].
/// Stochastic kinds draw from `rng`; the others never touch it.
Tensor apply_corruption(CorruptionKind kind, Severity t, const Tensor& image, Rng& rng,
                        const SeverityTable& table = SeverityTable::defaults());

/// Whether the kind consumes randomness.
bool is_stochastic(CorruptionKind kind);

/// Corrupts every image in an N x C x H x W batch, image i using rng.derive(i).
Tensor corrupt_batch(CorruptionKind kind, Severity t, const Tensor& batch, const Rng& rng,
                     const SeverityTable& table = SeverityTable::defaults());

/// Mean absolute per-pixel difference ||x - x_corr||_1 / (c*w*h).
double average_shift(const Tensor& x, const Tensor& x_corr);

/// Entry t-1 is the corpus mean of average_shift(x, apply(kind, t, x)) for
/// t = 1..5. Image i is corrupted with rng.derive(i).
std::array<double, kMaxSeverity> shift_profile(CorruptionKind kind, const LabeledDataset& corpus,
                                               const Rng& rng,
                                               const SeverityTable& table = SeverityTable::defaults());

}  // namespace crda
