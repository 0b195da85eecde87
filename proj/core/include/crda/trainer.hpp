#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crda/config.hpp"
#include "crda/corruptions.hpp"
#include "crda/dataset.hpp"
#include "crda/ddg.hpp"
#include "crda/losses.hpp"
#include "crda/metrics.hpp"
#include "crda/nn.hpp"
#include "crda/synthetic.hpp"

namespace crda {

/// How the student's contrastive inputs are produced.
///   ddg        - discrepancy generator samples around each target image
///   oracle     - the evaluation corruptions themselves (lower bound)
///   random_aug - a fixed set of mild known corruptions
///   none       - no contrastive term
enum class StudentMode { kDdg, kOracle, kRandomAug, kNone };

std::string_view student_mode_name(StudentMode mode);
std::optional<StudentMode> parse_student_mode(std::string_view name);

struct TrainConfig {
  std::size_t epochs_reference = 30;
  std::size_t epochs_teacher = 30;
  std::size_t epochs_student = 30;
  std::size_t batch_size = 32;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double lambda = kDefaultLambda;
  double tau = 0.2;
  std::size_t feature_dim = 64;

  TransferKind trans = TransferKind::kMmd;
  std::vector<double> mmd_bandwidths = {0.25, 1.0, 4.0};
  std::size_t disc_hidden = 32;
  double reversal_weight = 1.0;

  DdgConfig ddg;
  StudentMode student_mode = StudentMode::kDdg;
  /// Corruption kinds for oracle / random_aug, and the highest severity
  /// drawn. Severities are drawn uniformly from 1..max_severity.
  std::vector<CorruptionKind> corruptions;
  int max_severity = 5;

  std::uint64_t seed = 0;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Corruption list and severity cap used when a config selects a mode but
/// names no list: all 15 kinds up to t=5 for oracle, {brightness, contrast,
/// pixelate} up to t=3 for random_aug.
std::vector<CorruptionKind> default_mode_corruptions(StudentMode mode);
int default_mode_max_severity(StudentMode mode);

struct EpochLog {
  std::string phase;   // reference, teacher or student
  std::size_t epoch;   // 1-based, counted across phases
  LossReport report;
};

/// Teacher plus, under adversarial transfer, the domain discriminator that
/// the student phase keeps training.
struct TeacherState {
  Model teacher;
  std::optional<Model> discriminator;
};

/// Source-only supervised training on the classification loss.
Model train_reference(const DomainPair& pair, const TrainConfig& cfg, std::vector<EpochLog>* log = nullptr);

/// Minimises cls(source) + trans(source features, target features). Never
/// reads target labels. Starts from `init` when given (the pipeline passes
/// the source-only reference), otherwise from the seeded initialisation.
TeacherState train_teacher(const DomainPair& pair, const TrainConfig& cfg, std::vector<EpochLog>* log = nullptr,
                           const Model* init = nullptr);

/// Student initialised from the teacher and trained on
///   cls + trans + lambda * con(f_stu(x_aug), f_tea(x_t))
/// with x_aug from the configured mode. The teacher is read-only.
Model train_student(const DomainPair& pair, const TeacherState& teacher, const TrainConfig& cfg,
                    std::vector<EpochLog>* log = nullptr);

/// Everything an experiment needs besides the output directory.
struct ExperimentConfig {
  SynthSpec data;
  /// When set, data comes from these TDS files instead of the generator.
  std::optional<std::filesystem::path> source_file;
  std::optional<std::filesystem::path> target_file;
  TrainConfig train;
  std::size_t eval_threads = 1;
  std::string echo;
};

/// Keys accepted in experiment config files.
const std::set<std::string>& experiment_config_keys();
/// Parses and validates. `seed_override` replaces train.seed.
ExperimentConfig parse_experiment_config(const ConfigFile& file, std::optional<std::uint64_t> seed_override = {});

DomainPair load_or_generate_pair(const ExperimentConfig& cfg);

struct RunRecord {
  std::vector<EpochLog> losses;
  Model reference;
  Model teacher;
  Model student;
  ErrorGrid reference_grid;
  ErrorGrid teacher_grid;
  ErrorGrid student_grid;
  CeReport reference_ce;
  CeReport teacher_ce;
  CeReport student_ce;
  std::string config_echo;
  double wall_seconds = 0.0;
  /// Target label reads recorded after training and before evaluation.
  std::size_t target_label_reads_during_training = 0;
  bool teacher_unchanged = false;
};

/// reference -> teacher -> student -> evaluation on an already-built pair.
/// Writes the run directory when `out_dir` is non-empty.
RunRecord run_pipeline(const DomainPair& pair, const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Parses `config_path`, builds the data and runs the pipeline.
RunRecord run_experiment(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
                         std::optional<std::uint64_t> seed_override = {});

struct ModeResult {
  StudentMode mode;
  Model student;
  ErrorGrid grid;
  CeReport ce;
};

struct ModeComparison {
  Model reference;
  Model teacher;
  ErrorGrid reference_grid;
  ErrorGrid teacher_grid;
  CeReport teacher_ce;
  std::vector<ModeResult> students;
  double wall_seconds = 0.0;
};

/// Trains reference and teacher once, then one student per mode with that
/// mode's default corruption set and severity cap. All models are scored on
/// the same corrupted target cells.
ModeComparison compare_modes(const DomainPair& pair, const TrainConfig& cfg, std::span<const StudentMode> modes,
                             std::size_t threads = 1);

/// losses.csv text: epoch,cls,trans,con,total.
std::string losses_csv(const std::vector<EpochLog>& log);

/// Worker thread cap from CRDA_THREADS; 1 when unset.
std::size_t env_threads();

}  // namespace crda
