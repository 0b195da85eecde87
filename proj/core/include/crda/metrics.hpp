#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crda/corruptions.hpp"
#include "crda/dataset.hpp"
#include "crda/nn.hpp"
#include "crda/rng.hpp"

namespace crda {

/// Top-1 error per (kind, severity 1..5) plus the clean error.
struct ErrorGrid {
  std::array<std::array<double, kMaxSeverity>, kCorruptionCount> error{};
  double clean_error = 0.0;

  double at(CorruptionKind kind, int t) const { return error[kind_index(kind)][static_cast<std::size_t>(t - 1)]; }
  double& at(CorruptionKind kind, int t) { return error[kind_index(kind)][static_cast<std::size_t>(t - 1)]; }
  double clean_accuracy() const { return 1.0 - clean_error; }
  /// Throws std::invalid_argument if any entry lies outside [0, 1].
  void validate() const;
};

/// Corrupts the target set once per cell, using rng.derive(kind * 8 + t),
/// and scores every model on the same images. `threads` > 1 spreads cells
/// over worker threads without changing the result.
std::vector<ErrorGrid> error_grids(std::span<const Model* const> models, const LabeledDataset& target, const Rng& rng,
                                   std::size_t threads = 1);
ErrorGrid error_grid(const Model& model, const LabeledDataset& target, const Rng& rng, std::size_t threads = 1);

/// Fraction of `predictions` that differ from `labels`.
double error_rate(std::span<const std::size_t> predictions, std::span<const std::uint32_t> labels);

struct CeReport {
  std::string model_id;
  std::string reference_id;
  /// Unset for kinds whose reference error sum is zero.
  std::array<std::optional<double>, kCorruptionCount> ce{};
  double mce = 0.0;
  std::vector<CorruptionKind> excluded;
  std::vector<std::string> warnings;
};

/// CE_kind = sum_t E_model(kind, t) / sum_t E_ref(kind, t); mCE is the mean
/// over the kinds with a non-zero reference sum.
CeReport ce(const ErrorGrid& model, const ErrorGrid& reference, std::string model_id = "model",
            std::string reference_id = "reference");

/// `model,kind,CE` rows per report, each followed by `model,mCE,value`.
std::string metrics_csv(std::span<const CeReport> reports);

struct CurveArtifacts {
  std::string svg;
  /// Columns label,kind,t,error; clean rows use kind "clean" and t 0.
  std::string csv;
};

/// One panel per corruption kind with an error-vs-severity polyline per
/// labelled grid. Throws std::invalid_argument on an empty list.
CurveArtifacts severity_curves(std::span<const std::pair<std::string, ErrorGrid>> grids);

/// Shortest decimal form that round-trips the double.
std::string format_double(double v);

}  // namespace crda
