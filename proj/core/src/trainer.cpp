#include "crda/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

namespace crda {

std::string_view student_mode_name(StudentMode mode) {
  switch (mode) {
    case StudentMode::kDdg: return "ddg";
    case StudentMode::kOracle: return "oracle";
    case StudentMode::kRandomAug: return "random_aug";
    case StudentMode::kNone: return "none";
  }
  return "?";
}

std::optional<StudentMode> parse_student_mode(std::string_view name) {
  for (StudentMode m : {StudentMode::kDdg, StudentMode::kOracle, StudentMode::kRandomAug, StudentMode::kNone})
    if (student_mode_name(m) == name) return m;
  return std::nullopt;
}

std::vector<CorruptionKind> default_mode_corruptions(StudentMode mode) {
  switch (mode) {
    case StudentMode::kOracle: return {kAllCorruptions.begin(), kAllCorruptions.end()};
    case StudentMode::kRandomAug:
      return {CorruptionKind::kBrightness, CorruptionKind::kContrast, CorruptionKind::kPixelate};
    default: return {};
  }
}

int default_mode_max_severity(StudentMode mode) { return mode == StudentMode::kRandomAug ? 3 : 5; }

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("train config: " + what); };
  if (epochs_reference == 0) fail("epochs_reference must be positive");
  if (epochs_teacher == 0) fail("epochs_teacher must be positive");
  if (epochs_student == 0) fail("epochs_student must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(lr > 0.0)) fail("lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must be in [0,1)");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be non-negative");
  if (!(lambda >= 0.0)) fail("lambda must be non-negative");
  if (!(tau > 0.0)) fail("tau must be positive");
  if (feature_dim == 0) fail("feature_dim must be positive");
  if (trans == TransferKind::kMmd && mmd_bandwidths.empty()) fail("mmd_bandwidths must not be empty");
  if (trans == TransferKind::kAdversarial && disc_hidden == 0) fail("disc_hidden must be positive");
  ddg.validate();
  if (student_mode == StudentMode::kOracle || student_mode == StudentMode::kRandomAug) {
    if (corruptions.empty()) {
      fail(std::string("student_mode ") + std::string(student_mode_name(student_mode)) + " needs a corruption list");
    }
    if (max_severity < 1 || max_severity > static_cast<int>(kMaxSeverity)) fail("max_severity must be in 1..5");
  }
}

std::size_t env_threads() {
  const char* v = std::getenv("CRDA_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const unsigned long n = std::strtoul(v, &end, 10);
  if (*end != '\0' || n == 0) throw std::invalid_argument(std::string("CRDA_THREADS must be a positive integer, got '") + v + "'");
  return n;
}

namespace {

enum Phase : std::uint64_t { kReferencePhase = 1, kTeacherPhase = 2, kStudentPhase = 3 };

std::vector<std::size_t> permutation(std::size_t n, Rng rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  rng.shuffle(std::span<std::size_t>(p));
  return p;
}

/// Source and target visiting order for one epoch. The epoch has
/// ceil(Ns / B) steps; the target order wraps around when it is shorter.
struct EpochPlan {
  std::vector<std::size_t> source;
  std::vector<std::size_t> target;
  std::size_t steps;
  std::size_t batch;

  EpochPlan(const DomainPair& pair, const TrainConfig& cfg, Phase phase, std::size_t epoch) {
    const Rng r = Rng(cfg.seed).derive(stream::kShuffle).derive(phase * 1'000'000 + epoch);
    source = permutation(pair.source.size(), r.derive(0));
    target = permutation(pair.target.size(), r.derive(1));
    batch = cfg.batch_size;
    steps = (source.size() + batch - 1) / batch;
  }

  std::vector<std::size_t> source_batch(std::size_t step) const {
    const std::size_t b = step * batch, e = std::min(source.size(), b + batch);
    return {source.begin() + static_cast<std::ptrdiff_t>(b), source.begin() + static_cast<std::ptrdiff_t>(e)};
  }
  std::vector<std::size_t> target_batch(std::size_t step) const {
    const std::size_t n = std::min(batch, source.size() - step * batch);
    std::vector<std::size_t> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = target[(step * batch + k) % target.size()];
    return out;
  }
};

Model initial_model(const DomainPair& pair, const TrainConfig& cfg) {
  Rng init = Rng(cfg.seed).derive(stream::kInit);
  return Model::reference_architecture(pair.source.class_count(), init, pair.source.image_shape(), cfg.feature_dim);
}

Model initial_discriminator(const TrainConfig& cfg) {
  Rng init = Rng(cfg.seed).derive(stream::kInit).derive(1);
  return Model::discriminator(cfg.feature_dim, cfg.disc_hidden, init);
}

void check_finite(double v, const char* phase, std::size_t epoch, std::size_t step) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string("training diverged: non-finite loss in ") + phase + " phase, epoch " +
                       std::to_string(epoch) + ", step " + std::to_string(step) + " (try a smaller lr)");
  }
}

TransferLossKind transfer_kind(const TrainConfig& cfg, const Model* disc) {
  TransferLossKind tk;
  tk.kind = cfg.trans;
  tk.bandwidths = cfg.mmd_bandwidths;
  tk.discriminator = disc;
  tk.reversal_weight = cfg.reversal_weight;
  return tk;
}

struct OriStep {
  double cls = 0.0;
  double trans = 0.0;
  Gradients grads;
  Tensor source_features;
};

/// cls(source) + trans(source, target) and their gradients for `model`.
/// Under adversarial transfer also returns the discriminator's own gradients.
OriStep ori_step(const Model& model, const Tensor& xs, std::span<const std::uint32_t> ys, const Tensor& xt,
                 const TrainConfig& cfg, const Model* disc, Gradients* disc_grads) {
  const ForwardPass ps = model.forward(xs, true);
  const ForwardPass pt = model.forward(xt, false);
  const LossGrad cl = cls_loss(ps.logits(), ys);
  const PairLossGrad tl = transfer_loss(transfer_kind(cfg, disc), ps.features(), pt.features());
  OriStep out;
  out.cls = cl.value;
  out.trans = tl.value;
  out.grads = model.backward(ps, &tl.grad_source, &cl.grad, false);
  out.grads.accumulate(model.backward(pt, &tl.grad_target, nullptr, false));
  if (disc) *disc_grads = adversarial_trans(ps.features(), pt.features(), *disc, AdversarialMode::kTrainDisc).disc_grads;
  out.source_features = ps.features();
  return out;
}

void append_log(std::vector<EpochLog>* log, const char* phase, double cls, double trans, double con, double lambda) {
  if (!log) return;
  log->push_back(EpochLog{phase, log->size() + 1, total_loss(cls, trans, con, lambda)});
}

/// Corrupts each image of the batch with a kind and severity drawn from
/// `cfg`; image i uses rng.derive(i).
Tensor known_corruption_batch(const Tensor& xt, const TrainConfig& cfg, const Rng& rng) {
  Tensor out(xt.shape());
  const Shape image_shape(xt.shape().begin() + 1, xt.shape().end());
  for (std::size_t i = 0; i < xt.dim(0); ++i) {
    Rng r = rng.derive(i);
    const CorruptionKind kind = cfg.corruptions[r.below(cfg.corruptions.size())];
    const int t = 1 + static_cast<int>(r.below(static_cast<std::uint64_t>(cfg.max_severity)));
    const auto row = xt.row(i);
    const Tensor img(image_shape, std::vector<double>(row.begin(), row.end()));
    const Tensor c = apply_corruption(kind, Severity(t), img, r);
    std::copy(c.data().begin(), c.data().end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

Model train_reference(const DomainPair& pair, const TrainConfig& cfg, std::vector<EpochLog>* log) {
  pair.validate();
  cfg.validate();
  Model model = initial_model(pair, cfg);
  model.set_role(Role::kReference);
  Sgd opt(cfg.lr, cfg.momentum, cfg.weight_decay);
  for (std::size_t epoch = 0; epoch < cfg.epochs_reference; ++epoch) {
    const EpochPlan plan(pair, cfg, kReferencePhase, epoch);
    double cls = 0.0;
    for (std::size_t step = 0; step < plan.steps; ++step) {
      const auto idx = plan.source_batch(step);
      const ForwardPass p = model.forward(pair.source.batch(idx), true);
      const LossGrad l = cls_loss(p.logits(), pair.source.labels(idx));
      check_finite(l.value, "reference", epoch, step);
      opt.step(model, model.backward(p, nullptr, &l.grad, false));
      cls += l.value;
    }
    append_log(log, "reference", cls / static_cast<double>(plan.steps), 0.0, 0.0, cfg.lambda);
  }
  return model;
}

TeacherState train_teacher(const DomainPair& pair, const TrainConfig& cfg, std::vector<EpochLog>* log,
                           const Model* init) {
  pair.validate();
  cfg.validate();
  TeacherState state{init ? *init : initial_model(pair, cfg), std::nullopt};
  state.teacher.set_role(Role::kTeacher);
  if (cfg.trans == TransferKind::kAdversarial) state.discriminator = initial_discriminator(cfg);
  Sgd opt(cfg.lr, cfg.momentum, cfg.weight_decay), disc_opt(cfg.lr, cfg.momentum, cfg.weight_decay);
  Model* disc = state.discriminator ? &*state.discriminator : nullptr;
  for (std::size_t epoch = 0; epoch < cfg.epochs_teacher; ++epoch) {
    const EpochPlan plan(pair, cfg, kTeacherPhase, epoch);
    double cls = 0.0, trans = 0.0;
    for (std::size_t step = 0; step < plan.steps; ++step) {
      const auto si = plan.source_batch(step);
      Gradients dg;
      OriStep o = ori_step(state.teacher, pair.source.batch(si), pair.source.labels(si),
                           pair.target.batch(plan.target_batch(step)), cfg, disc, &dg);
      check_finite(o.cls + o.trans, "teacher", epoch, step);
      opt.step(state.teacher, o.grads);
      if (disc) disc_opt.step(*disc, dg);
      cls += o.cls;
      trans += o.trans;
    }
    const double n = static_cast<double>(plan.steps);
    append_log(log, "teacher", cls / n, trans / n, 0.0, cfg.lambda);
  }
  return state;
}

Model train_student(const DomainPair& pair, const TeacherState& teacher_state, const TrainConfig& cfg,
                    std::vector<EpochLog>* log) {
  pair.validate();
  cfg.validate();
  const Model& teacher = teacher_state.teacher;
  if (cfg.trans == TransferKind::kAdversarial && !teacher_state.discriminator) {
    throw std::invalid_argument("train_student: adversarial transfer needs the teacher's discriminator");
  }
  Model student = teacher;
  student.set_role(Role::kStudent);
  std::optional<Model> disc = teacher_state.discriminator;
  Sgd opt(cfg.lr, cfg.momentum, cfg.weight_decay), disc_opt(cfg.lr, cfg.momentum, cfg.weight_decay);
  const ContrastiveConfig con_cfg{cfg.tau};
  const Rng ddg_root = Rng(cfg.seed).derive(stream::kDdg);
  const Rng aug_root = Rng(cfg.seed).derive(stream::kAugment);

  for (std::size_t epoch = 0; epoch < cfg.epochs_student; ++epoch) {
    const EpochPlan plan(pair, cfg, kStudentPhase, epoch);
    double cls = 0.0, trans = 0.0, con = 0.0;
    for (std::size_t step = 0; step < plan.steps; ++step) {
      const auto si = plan.source_batch(step);
      const Tensor xt = pair.target.batch(plan.target_batch(step));
      Gradients dg;
      OriStep o = ori_step(student, pair.source.batch(si), pair.source.labels(si), xt, cfg,
                           disc ? &*disc : nullptr, &dg);
      double con_value = 0.0;
      if (cfg.student_mode != StudentMode::kNone) {
        const std::uint64_t key = epoch * 1'000'000 + step;
        Tensor x_aug;
        if (cfg.student_mode == StudentMode::kDdg) {
          Rng r = ddg_root.derive(key);
          x_aug = generate(student, transfer_kind(cfg, disc ? &*disc : nullptr), xt, o.source_features, cfg.ddg, r)
                      .generated;
        } else {
          x_aug = known_corruption_batch(xt, cfg, aug_root.derive(key));
        }
        const ForwardPass pa = student.forward(x_aug, false);
        const LossGrad cl = contrastive_loss(pa.features(), teacher.forward_features(xt), con_cfg);
        Gradients gc = student.backward(pa, &cl.grad, nullptr, false);
        gc.scale(cfg.lambda);
        o.grads.accumulate(gc);
        con_value = cl.value;
      }
      check_finite(o.cls + o.trans + con_value, "student", epoch, step);
      opt.step(student, o.grads);
      if (disc) disc_opt.step(*disc, dg);
      cls += o.cls;
      trans += o.trans;
      con += con_value;
    }
    const double n = static_cast<double>(plan.steps);
    append_log(log, "student", cls / n, trans / n, con / n, cfg.lambda);
  }
  return student;
}

// ---------------------------------------------------------------------------
// Experiment plumbing

const std::set<std::string>& experiment_config_keys() {
  static const std::set<std::string> keys = {
      "data.classes",          "data.samples_per_domain", "data.height",          "data.width",
      "data.source",           "data.target",             "model.feature_dim",    "model.disc_hidden",
      "train.epochs_reference", "train.epochs_teacher",   "train.epochs_student", "train.batch_size",
      "train.lr",              "train.momentum",          "train.weight_decay",   "train.lambda",
      "train.tau",             "train.trans",             "train.mmd_bandwidths", "train.reversal_weight",
      "train.student_mode",    "train.corruptions",       "train.max_severity",   "train.seed",
      "ddg.delta",             "ddg.eta",                 "ddg.n",                "ddg.random_start",
      "eval.threads",
  };
  return keys;
}

namespace {

std::size_t positive_size(const ConfigFile& f, const std::string& key, std::size_t fallback) {
  const std::int64_t v = f.get_int(key, static_cast<std::int64_t>(fallback));
  if (v <= 0) throw ConfigError(key + " must be a positive integer");
  return static_cast<std::size_t>(v);
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

std::string resolved_echo(const ExperimentConfig& c) {
  const TrainConfig& t = c.train;
  std::ostringstream os;
  if (c.source_file) {
    os << "data.source = " << c.source_file->string() << "\n";
    os << "data.target = " << c.target_file->string() << "\n";
  } else {
    os << "data.classes = " << c.data.classes << "\n";
    os << "data.samples_per_domain = " << c.data.samples_per_domain << "\n";
    os << "data.height = " << c.data.height << "\n";
    os << "data.width = " << c.data.width << "\n";
  }
  os << "model.feature_dim = " << t.feature_dim << "\n";
  os << "model.disc_hidden = " << t.disc_hidden << "\n";
  os << "train.epochs_reference = " << t.epochs_reference << "\n";
  os << "train.epochs_teacher = " << t.epochs_teacher << "\n";
  os << "train.epochs_student = " << t.epochs_student << "\n";
  os << "train.batch_size = " << t.batch_size << "\n";
  os << "train.lr = " << format_double(t.lr) << "\n";
  os << "train.momentum = " << format_double(t.momentum) << "\n";
  os << "train.weight_decay = " << format_double(t.weight_decay) << "\n";
  os << "train.lambda = " << format_double(t.lambda) << "\n";
  os << "train.tau = " << format_double(t.tau) << "\n";
  os << "train.trans = " << (t.trans == TransferKind::kMmd ? "mmd" : "adversarial") << "\n";
  os << "train.mmd_bandwidths = " << join_doubles(t.mmd_bandwidths) << "\n";
  os << "train.reversal_weight = " << format_double(t.reversal_weight) << "\n";
  os << "train.student_mode = " << student_mode_name(t.student_mode) << "\n";
  os << "train.corruptions = ";
  for (std::size_t i = 0; i < t.corruptions.size(); ++i) os << (i ? "," : "") << corruption_name(t.corruptions[i]);
  if (t.corruptions.empty()) os << "none";
  os << "\n";
  os << "train.max_severity = " << t.max_severity << "\n";
  os << "train.seed = " << t.seed << "\n";
  os << "ddg.delta = " << format_double(t.ddg.delta) << "\n";
  os << "ddg.eta = " << format_double(t.ddg.effective_eta()) << "\n";
  os << "ddg.n = " << t.ddg.steps << "\n";
  os << "ddg.random_start = " << (t.ddg.random_start ? "true" : "false") << "\n";
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

ExperimentConfig parse_experiment_config(const ConfigFile& f, std::optional<std::uint64_t> seed_override) {
  f.reject_unknown(experiment_config_keys());
  ExperimentConfig c;
  f.require("train.student_mode");
  if (f.has("data.source") || f.has("data.target")) {
    f.require("data.source");
    f.require("data.target");
    c.source_file = f.get_string("data.source");
    c.target_file = f.get_string("data.target");
  } else {
    f.require("data.classes");
    f.require("data.samples_per_domain");
    c.data.classes = positive_size(f, "data.classes", 0);
    c.data.samples_per_domain = positive_size(f, "data.samples_per_domain", 0);
    c.data.height = positive_size(f, "data.height", c.data.height);
    c.data.width = positive_size(f, "data.width", c.data.width);
  }

  TrainConfig& t = c.train;
  t.feature_dim = positive_size(f, "model.feature_dim", t.feature_dim);
  t.disc_hidden = positive_size(f, "model.disc_hidden", t.disc_hidden);
  t.epochs_reference = positive_size(f, "train.epochs_reference", t.epochs_reference);
  t.epochs_teacher = positive_size(f, "train.epochs_teacher", t.epochs_teacher);
  t.epochs_student = positive_size(f, "train.epochs_student", t.epochs_student);
  t.batch_size = positive_size(f, "train.batch_size", t.batch_size);
  t.lr = f.get_double("train.lr", t.lr);
  t.momentum = f.get_double("train.momentum", t.momentum);
  t.weight_decay = f.get_double("train.weight_decay", t.weight_decay);
  t.lambda = f.get_double("train.lambda", t.lambda);
  t.tau = f.get_double("train.tau", t.tau);
  const std::string trans = f.get_string("train.trans", "mmd");
  if (trans == "mmd") {
    t.trans = TransferKind::kMmd;
  } else if (trans == "adversarial") {
    t.trans = TransferKind::kAdversarial;
  } else {
    throw ConfigError("train.trans: expected mmd or adversarial, got '" + trans + "'");
  }
  if (f.has("train.mmd_bandwidths")) {
    t.mmd_bandwidths.clear();
    for (const std::string& s : f.get_list("train.mmd_bandwidths")) t.mmd_bandwidths.push_back(parse_number(s));
  }
  t.reversal_weight = f.get_double("train.reversal_weight", t.reversal_weight);

  const std::string mode = f.get_string("train.student_mode");
  const auto parsed = parse_student_mode(mode);
  if (!parsed) throw ConfigError("train.student_mode: expected ddg, oracle, random_aug or none, got '" + mode + "'");
  t.student_mode = *parsed;
  if (f.has("train.corruptions")) {
    for (const std::string& name : f.get_list("train.corruptions")) {
      const auto k = parse_corruption(name);
      if (!k) throw ConfigError("train.corruptions: unknown corruption '" + name + "'");
      t.corruptions.push_back(*k);
    }
  } else {
    t.corruptions = default_mode_corruptions(t.student_mode);
  }
  t.max_severity = static_cast<int>(f.get_int("train.max_severity", default_mode_max_severity(t.student_mode)));
  t.seed = seed_override ? *seed_override : f.get_u64("train.seed", 0);

  t.ddg.delta = f.get_double("ddg.delta", t.ddg.delta);
  if (f.has("ddg.eta") && f.get_string("ddg.eta") != "auto") t.ddg.eta = f.get_double("ddg.eta");
  t.ddg.steps = static_cast<int>(f.get_int("ddg.n", t.ddg.steps));
  t.ddg.random_start = f.get_bool("ddg.random_start", t.ddg.random_start);
  c.eval_threads = positive_size(f, "eval.threads", 1);

  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.echo = resolved_echo(c);
  return c;
}

DomainPair load_or_generate_pair(const ExperimentConfig& cfg) {
  if (cfg.source_file) {
    DomainPair pair{load_tds(*cfg.source_file, "source"), load_tds(*cfg.target_file, "target")};
    pair.validate();
    return pair;
  }
  Rng r = Rng(cfg.train.seed).derive(stream::kDataGen);
  return generate_synthetic_pair(r, cfg.data);
}

std::string losses_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,cls,trans,con,total\n";
  for (const EpochLog& e : log) {
    out += std::to_string(e.epoch) + "," + format_double(e.report.cls) + "," + format_double(e.report.trans) + "," +
           format_double(e.report.con) + "," + format_double(e.report.total) + "\n";
  }
  return out;
}

RunRecord run_pipeline(const DomainPair& pair, const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.config_echo = cfg.echo;
  const std::size_t reads_before = pair.target.label_reads();

  std::cerr << "training reference (" << cfg.train.epochs_reference << " epochs)\n";
  rec.reference = train_reference(pair, cfg.train, &rec.losses);
  std::cerr << "training teacher (" << cfg.train.epochs_teacher << " epochs)\n";
  const TeacherState teacher = train_teacher(pair, cfg.train, &rec.losses, &rec.reference);
  const std::uint64_t teacher_hash = teacher.teacher.parameter_hash();
  std::cerr << "training student, mode " << student_mode_name(cfg.train.student_mode) << " ("
            << cfg.train.epochs_student << " epochs)\n";
  rec.student = train_student(pair, teacher, cfg.train, &rec.losses);
  rec.teacher = teacher.teacher;
  rec.teacher_unchanged = teacher.teacher.parameter_hash() == teacher_hash;
  rec.target_label_reads_during_training = pair.target.label_reads() - reads_before;

  std::cerr << "evaluating on " << kCorruptionCount * kMaxSeverity << " corruption cells\n";
  const Model* models[] = {&rec.reference, &rec.teacher, &rec.student};
  const std::size_t threads = std::min(cfg.eval_threads, env_threads());
  auto grids = error_grids(models, pair.target, Rng(cfg.train.seed).derive(stream::kEval), threads);
  rec.reference_grid = grids[0];
  rec.teacher_grid = grids[1];
  rec.student_grid = grids[2];
  rec.reference_ce = ce(rec.reference_grid, rec.reference_grid, "reference", "reference");
  rec.teacher_ce = ce(rec.teacher_grid, rec.reference_grid, "teacher", "reference");
  rec.student_ce = ce(rec.student_grid, rec.reference_grid, "student", "reference");
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    save_ckpt(rec.reference, out_dir / "reference.ckpt");
    save_ckpt(rec.teacher, out_dir / "teacher.ckpt");
    save_ckpt(rec.student, out_dir / "student.ckpt");
    write_text(out_dir / "losses.csv", losses_csv(rec.losses));
    const CeReport reports[] = {rec.reference_ce, rec.teacher_ce, rec.student_ce};
    write_text(out_dir / "metrics.csv", metrics_csv(reports));
    write_text(out_dir / "accuracy.csv", "model,clean_acc\nreference," +
                                             format_double(rec.reference_grid.clean_accuracy()) + "\nteacher," +
                                             format_double(rec.teacher_grid.clean_accuracy()) + "\nstudent," +
                                             format_double(rec.student_grid.clean_accuracy()) + "\n");
    const std::pair<std::string, ErrorGrid> curves[] = {
        {"reference", rec.reference_grid}, {"teacher", rec.teacher_grid}, {"student", rec.student_grid}};
    const CurveArtifacts art = severity_curves(curves);
    write_text(out_dir / "errors.csv", art.csv);
    write_text(out_dir / "curves.svg", art.svg);
    write_text(out_dir / "config.echo", rec.config_echo);
    write_text(out_dir / "timing.txt", "wall_seconds=" + format_double(rec.wall_seconds) + "\n");
  }
  return rec;
}

ModeComparison compare_modes(const DomainPair& pair, const TrainConfig& cfg, std::span<const StudentMode> modes,
                             std::size_t threads) {
  const auto start = std::chrono::steady_clock::now();
  ModeComparison out;
  out.reference = train_reference(pair, cfg);
  const TeacherState teacher = train_teacher(pair, cfg, nullptr, &out.reference);
  out.teacher = teacher.teacher;
  for (StudentMode mode : modes) {
    TrainConfig sc = cfg;
    sc.student_mode = mode;
    sc.corruptions = default_mode_corruptions(mode);
    sc.max_severity = default_mode_max_severity(mode);
    out.students.push_back({mode, train_student(pair, teacher, sc), {}, {}});
  }

  std::vector<const Model*> models = {&out.reference, &out.teacher};
  for (const ModeResult& r : out.students) models.push_back(&r.student);
  auto grids = error_grids(models, pair.target, Rng(cfg.seed).derive(stream::kEval), threads);
  out.reference_grid = grids[0];
  out.teacher_grid = grids[1];
  out.teacher_ce = ce(out.teacher_grid, out.reference_grid, "teacher", "reference");
  for (std::size_t i = 0; i < out.students.size(); ++i) {
    ModeResult& r = out.students[i];
    r.grid = grids[i + 2];
    r.ce = ce(r.grid, out.reference_grid, std::string(student_mode_name(r.mode)), "reference");
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

RunRecord run_experiment(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
                         std::optional<std::uint64_t> seed_override) {
  const ExperimentConfig cfg = parse_experiment_config(ConfigFile::load(config_path), seed_override);
  const DomainPair pair = load_or_generate_pair(cfg);
  return run_pipeline(pair, cfg, out_dir);
}

}  // namespace crda
