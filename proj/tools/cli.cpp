#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "crda/assumptions.hpp"
#include "crda/config.hpp"
#include "crda/corruptions.hpp"
#include "crda/dataset.hpp"
#include "crda/ddg.hpp"
#include "crda/metrics.hpp"
#include "crda/nn.hpp"
#include "crda/synthetic.hpp"
#include "crda/trainer.hpp"

namespace crda::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::uint64_t seed_value = 0;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* sub, bool out_required) {
    sub->add_option("--config", config, "Config file (section.key = value)");
    seed_opt = sub->add_option("--seed", seed_value, "Master seed; overrides train.seed");
    auto* o = sub->add_option("--out", out, "Output directory");
    if (out_required) o->required();
  }

  std::optional<std::uint64_t> seed() const {
    if (seed_opt && seed_opt->count()) return seed_value;
    return std::nullopt;
  }

  ConfigFile file() const { return config.empty() ? ConfigFile::parse("", "<defaults>") : ConfigFile::load(config); }

  std::uint64_t resolved_seed() const {
    if (auto s = seed()) return *s;
    return file().get_u64("train.seed", 0);
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// Builds the reference architecture for `data` and loads `ckpt` into it.
Model load_model(const fs::path& ckpt, const LabeledDataset& data, std::size_t feature_dim) {
  Rng dummy(0);
  Model m = Model::reference_architecture(data.class_count(), dummy, data.image_shape(), feature_dim);
  load_ckpt(m, ckpt);
  return m;
}

std::size_t feature_dim_from(const Common& c) {
  const std::int64_t d = c.file().get_int("model.feature_dim", 64);
  if (d <= 0) throw ConfigError("model.feature_dim must be positive");
  return static_cast<std::size_t>(d);
}

SynthSpec synth_spec_from(const ConfigFile& f) {
  SynthSpec s;
  s.classes = static_cast<std::size_t>(f.get_int("data.classes", static_cast<std::int64_t>(s.classes)));
  s.samples_per_domain =
      static_cast<std::size_t>(f.get_int("data.samples_per_domain", static_cast<std::int64_t>(s.samples_per_domain)));
  s.height = static_cast<std::size_t>(f.get_int("data.height", static_cast<std::int64_t>(s.height)));
  s.width = static_cast<std::size_t>(f.get_int("data.width", static_cast<std::int64_t>(s.width)));
  return s;
}

// ---------------------------------------------------------------------------

struct GenData {
  Common c;
  std::optional<std::size_t> classes, samples;
  std::string ppm_dir, labels;
};

int cmd_gen_data(const GenData& g, std::ostream& out, std::ostream& err) {
  const fs::path dir = g.c.out;
  fs::create_directories(dir);
  if (!g.ppm_dir.empty()) {
    if (g.labels.empty()) throw std::invalid_argument("--ppm needs --labels");
    std::optional<std::size_t> classes = g.classes;
    const LabeledDataset ds = ingest_ppm_dir(g.ppm_dir, g.labels, classes);
    save_tds(ds, dir / "dataset.tds");
    err << "ingested " << ds.size() << " images\n";
    out << "dataset=" << (dir / "dataset.tds").string() << "\n";
    return kOk;
  }
  SynthSpec spec = synth_spec_from(g.c.file());
  if (g.classes) spec.classes = *g.classes;
  if (g.samples) spec.samples_per_domain = *g.samples;
  Rng r = Rng(g.c.resolved_seed()).derive(stream::kDataGen);
  const DomainPair pair = generate_synthetic_pair(r, spec);
  save_tds(pair.source, dir / "source.tds");
  save_tds(pair.target, dir / "target.tds");
  err << "generated " << spec.samples_per_domain << " images per domain, " << spec.classes << " classes\n";
  out << "source=" << (dir / "source.tds").string() << "\n" << "target=" << (dir / "target.tds").string() << "\n";
  return kOk;
}

struct Corrupt {
  Common c;
  std::string in;
};

int cmd_corrupt(const Corrupt& a, std::ostream& out, std::ostream& err) {
  const LabeledDataset ds = load_tds(a.in);
  const fs::path dir = a.c.out;
  fs::create_directories(dir);
  const std::string stem = fs::path(a.in).stem().string();
  const Rng root = Rng(a.c.resolved_seed()).derive(stream::kCorruption);
  std::size_t files = 0;
  for (CorruptionKind kind : kAllCorruptions) {
    for (int t = 1; t <= static_cast<int>(kMaxSeverity); ++t) {
      const Tensor images = corrupt_batch(kind, Severity(t), ds.images(), root.derive(kind_index(kind) * 8 + t));
      const LabeledDataset cd(images, ds.all_labels(), ds.class_count(), ds.domain_tag());
      save_tds(cd, dir / (stem + "." + std::string(corruption_name(kind)) + "." + std::to_string(t) + ".tds"));
      ++files;
    }
    err << corruption_name(kind) << " done\n";
  }
  out << "files=" << files << "\n";
  return kOk;
}

struct Train {
  Common c;
  std::string mode;
};

int cmd_train(const Train& a, std::ostream& out, std::ostream& err) {
  if (a.c.config.empty()) throw CLI::RequiredError("--config");
  ConfigFile file = ConfigFile::load(a.c.config);
  if (!a.mode.empty()) file.set("train.student_mode", a.mode);
  const ExperimentConfig cfg = parse_experiment_config(file, a.c.seed());
  const DomainPair pair = load_or_generate_pair(cfg);
  const RunRecord rec = run_pipeline(pair, cfg, a.c.out);
  err << "reference clean acc " << rec.reference_grid.clean_accuracy() << ", teacher " << rec.teacher_grid.clean_accuracy()
      << ", student " << rec.student_grid.clean_accuracy() << "\n";
  err << "teacher mCE " << rec.teacher_ce.mce << ", wall " << rec.wall_seconds << " s\n";
  out << "mCE=" << format_double(rec.student_ce.mce) << "\n";
  return kOk;
}

struct Evaluate {
  Common c;
  std::string model, reference, data;
};

int cmd_evaluate(const Evaluate& a, std::ostream& out, std::ostream& err) {
  const LabeledDataset target = load_tds(a.data, "target");
  const std::size_t d = feature_dim_from(a.c);
  const Model model = load_model(a.model, target, d);
  const Model reference = load_model(a.reference, target, d);
  const Model* models[] = {&reference, &model};
  const auto grids = error_grids(models, target, Rng(a.c.resolved_seed()).derive(stream::kEval), env_threads());
  const CeReport report = ce(grids[1], grids[0], "model", "reference");
  for (const std::string& w : report.warnings) err << "warning: " << w << "\n";
  err << "clean accuracy " << grids[1].clean_accuracy() << " (reference " << grids[0].clean_accuracy() << ")\n";
  if (!a.c.out.empty()) {
    const fs::path dir = a.c.out;
    fs::create_directories(dir);
    const CeReport reports[] = {report};
    write_text(dir / "metrics.csv", metrics_csv(reports));
    const std::pair<std::string, ErrorGrid> curves[] = {{"reference", grids[0]}, {"model", grids[1]}};
    const CurveArtifacts art = severity_curves(curves);
    write_text(dir / "errors.csv", art.csv);
    write_text(dir / "curves.svg", art.svg);
  }
  out << "mCE=" << format_double(report.mce) << "\n";
  return kOk;
}

struct DdgGen {
  Common c;
  std::string model, source, data;
  double delta = 60.0 / 255.0;
  std::string eta = "auto";
  int n = 2;
  std::size_t batch = 32;
};

int cmd_ddg_gen(const DdgGen& a, std::ostream& out, std::ostream& err) {
  const LabeledDataset source = load_tds(a.source, "source");
  const LabeledDataset target = load_tds(a.data, "target");
  const Model model = load_model(a.model, target, feature_dim_from(a.c));
  DdgConfig cfg;
  cfg.delta = a.delta;
  cfg.steps = a.n;
  if (a.eta != "auto") cfg.eta = parse_number(a.eta);
  const std::size_t n = std::min({a.batch, source.size(), target.size()});
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng = Rng(a.c.resolved_seed()).derive(stream::kDdg);
  const DdgBatch b = generate(model, TransferLossKind{}, target.batch(idx), model.forward_features(source.batch(idx)), cfg, rng);
  const fs::path dir = a.c.out;
  fs::create_directories(dir);
  const auto labels = target.labels(idx);
  save_tds(LabeledDataset(b.originals, labels, target.class_count(), "target"), dir / "originals.tds");
  save_tds(LabeledDataset(b.generated, labels, target.class_count(), "ddg"), dir / "generated.tds");
  err << "wrote " << n << " original/generated pairs\n";
  out << "trans_before=" << format_double(b.trans_loss_before) << "\n"
      << "trans_after=" << format_double(b.trans_loss_after) << "\n"
      << "edge_fraction=" << format_double(edge_fraction(b, cfg)) << "\n";
  return kOk;
}

struct Validate {
  Common c;
  std::string model, source, target;
  bool order_study = false;
  std::string kind = "gaussian_noise";
  std::size_t epochs = 10;
};

int cmd_validate(const Validate& a, std::ostream& out, std::ostream& err) {
  const std::uint64_t seed = a.c.resolved_seed();
  std::optional<DomainPair> pair;
  if (!a.source.empty() || !a.target.empty()) {
    if (a.source.empty() || a.target.empty()) throw std::invalid_argument("--source and --target go together");
    pair.emplace(DomainPair{load_tds(a.source, "source"), load_tds(a.target, "target")});
    pair->validate();
  } else {
    Rng r = Rng(seed).derive(stream::kDataGen);
    pair.emplace(generate_synthetic_pair(r, synth_spec_from(a.c.file())));
  }
  const Rng root = Rng(seed).derive(stream::kHarness);
  const fs::path dir = a.c.out;
  fs::create_directories(dir);

  std::vector<MonotonicityReport> reports;
  reports.push_back(check_assumption1(pair->target, root.derive(1)));
  {
    const auto& r = reports.back();
    out << "assumption1=" << (r.aggregate_pass ? "pass" : "fail") << " monotone=" << r.monotone_passes
        << " contained=" << r.secondary_passes << "\n";
    ErrorGrid shifts;
    for (const KindCurve& k : r.kinds)
      for (std::size_t t = 0; t < kMaxSeverity; ++t) shifts.error[kind_index(k.kind)][t] = std::min(1.0, k.values[t]);
    const std::pair<std::string, ErrorGrid> curves[] = {{"average shift", shifts}};
    write_text(dir / "assumption1.svg", severity_curves(curves).svg);
  }
  if (!a.model.empty()) {
    const Model model = load_model(a.model, pair->target, feature_dim_from(a.c));
    reports.push_back(check_assumption2(model, pair->target, root.derive(2)));
    const auto& r2 = reports.back();
    if (r2.flagged_untrained) err << "warning: model scores near chance; assumption 2 concerns trained networks\n";
    out << "assumption2=" << (r2.aggregate_pass ? "pass" : "fail") << " monotone=" << r2.monotone_passes << "\n";
    reports.push_back(check_assumption3(model, *pair, root.derive(3)));
    const auto& r3 = reports.back();
    out << "assumption3=" << (r3.aggregate_pass ? "pass" : "fail") << " monotone=" << r3.monotone_passes
        << " premise=" << format_double(r3.premise_fraction) << "\n";
  }
  write_text(dir / "assumptions.csv", assumptions_csv(reports));
  if (a.order_study) {
    const auto kind = parse_corruption(a.kind);
    if (!kind) throw std::invalid_argument("unknown corruption '" + a.kind + "'");
    OrderStudyConfig cfg;
    cfg.epochs = a.epochs;
    err << "order-invariance study: 4 regimes x " << cfg.epochs << " epochs\n";
    const auto curves = order_invariance_study(pair->source, *kind, root.derive(4), cfg);
    write_text(dir / "order_study.csv", order_study_csv(curves));
    for (const RegimeCurve& c : curves) out << "regime=" << regime_name(c.regime) << " rho=" << format_double(c.rho) << "\n";
  }
  return kOk;
}

struct Ablate {
  Common c;
  std::string grid = "60/255:auto:2;60/255:6/255:2";
};

std::vector<AblationPoint> parse_grid(const std::string& text) {
  std::vector<AblationPoint> points;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    std::stringstream is(item);
    std::string d, e, n;
    if (!std::getline(is, d, ':') || !std::getline(is, e, ':') || !std::getline(is, n)) {
      throw CLI::ValidationError("--grid", "expected delta:eta:n entries separated by ';', got '" + item + "'");
    }
    AblationPoint p{parse_number(d), std::nullopt, static_cast<int>(parse_number(n))};
    if (e != "auto") p.eta = parse_number(e);
    points.push_back(p);
  }
  if (points.empty()) throw CLI::ValidationError("--grid", "no grid points");
  return points;
}

int cmd_ablate(const Ablate& a, std::ostream& out, std::ostream& err) {
  if (a.c.config.empty()) throw CLI::RequiredError("--config");
  const auto points = parse_grid(a.grid);
  ConfigFile file = ConfigFile::load(a.c.config);
  file.set("train.student_mode", "ddg");
  const ExperimentConfig cfg = parse_experiment_config(file, a.c.seed());
  const DomainPair pair = load_or_generate_pair(cfg);
  err << "ablation over " << points.size() << " grid points\n";
  const auto rows = ablation_sweep(pair, cfg, points);
  const fs::path dir = a.c.out;
  fs::create_directories(dir);
  write_text(dir / "ablation.csv", ablation_csv(rows));
  for (const AblationRow& r : rows) {
    out << "delta=" << format_double(r.delta) << " eta=" << format_double(r.eta) << " n=" << r.n
        << " mCE=" << format_double(r.mce) << "\n";
  }
  return kOk;
}

struct Report {
  Common c;
  std::vector<std::string> runs;
};

int cmd_report(const Report& a, std::ostream& out, std::ostream&) {
  std::string merged = "run,model,kind,CE\n";
  // run -> model -> mCE, in input order.
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, double>>>> summary;
  for (const std::string& run : a.runs) {
    const std::string name = fs::path(run).filename().string().empty() ? fs::path(run).parent_path().filename().string()
                                                                       : fs::path(run).filename().string();
    std::stringstream ss(read_text(fs::path(run) / "metrics.csv"));
    std::string line;
    std::getline(ss, line);
    if (line != "model,kind,CE") throw FormatError(run + "/metrics.csv: unexpected header '" + line + "'");
    summary.push_back({name, {}});
    while (std::getline(ss, line)) {
      if (line.empty()) continue;
      merged += name + "," + line + "\n";
      const auto c1 = line.find(','), c2 = line.rfind(',');
      if (c1 == std::string::npos || c1 == c2) throw FormatError(run + "/metrics.csv: malformed row '" + line + "'");
      if (line.substr(c1 + 1, c2 - c1 - 1) == "mCE") {
        summary.back().second.push_back({line.substr(0, c1), parse_number(line.substr(c2 + 1))});
      }
    }
  }
  const fs::path dir = a.c.out;
  fs::create_directories(dir);
  write_text(dir / "report.csv", merged);

  double top = 0.0;
  std::size_t bars = 0;
  for (const auto& [run, models] : summary) {
    bars += models.size() + 1;
    for (const auto& [m, v] : models) top = std::max(top, v);
  }
  top = std::max(top, 1e-9) * 1.1;
  const int bar_w = 26, height = 260, base = 220;
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
      << 40 + bar_w * static_cast<int>(bars) << "\" height=\"" << height << "\" font-family=\"sans-serif\" font-size=\"9\">\n";
  svg << "<text x=\"4\" y=\"12\">mCE by run and model</text>\n";
  const std::map<std::string, std::string> colours = {{"reference", "#7f7f7f"}, {"teacher", "#1f77b4"}, {"student", "#d62728"}};
  int x = 30;
  for (const auto& [run, models] : summary) {
    for (const auto& [m, v] : models) {
      const auto it = colours.find(m);
      const double h = (base - 20) * v / top;
      svg << "<rect x=\"" << x << "\" y=\"" << base - h << "\" width=\"" << bar_w - 4 << "\" height=\"" << h << "\" fill=\""
          << (it == colours.end() ? "#2ca02c" : it->second) << "\"><title>" << run << " " << m << " " << format_double(v)
          << "</title></rect>\n";
      svg << "<text x=\"" << x << "\" y=\"" << base + 12 << "\">" << m.substr(0, 3) << "</text>\n";
      out << "run=" << run << " model=" << m << " mCE=" << format_double(v) << "\n";
      x += bar_w;
    }
    svg << "<text x=\"" << x - bar_w * static_cast<int>(models.size()) << "\" y=\"" << base + 26 << "\">" << run << "</text>\n";
    x += bar_w;
  }
  svg << "</svg>\n";
  write_text(dir / "report.svg", svg.str());
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"crda-lab: corruption-robust domain adaptation experiments"};
  app.require_subcommand(1, 1);

  GenData gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate the synthetic source/target pair, or ingest PPM images");
  gen.c.attach(gen_cmd, true);
  gen_cmd->add_option("--classes", gen.classes, "Class count");
  gen_cmd->add_option("--samples", gen.samples, "Images per domain");
  gen_cmd->add_option("--ppm", gen.ppm_dir, "Directory of P6 PPM images to ingest");
  gen_cmd->add_option("--labels", gen.labels, "filename<TAB>class file for --ppm");

  Corrupt cor;
  auto* cor_cmd = app.add_subcommand("corrupt", "Write all 15 x 5 corrupted copies of a TDS file");
  cor.c.attach(cor_cmd, true);
  cor_cmd->add_option("--in", cor.in, "Input TDS file")->required();

  Train tr;
  auto* tr_cmd = app.add_subcommand("train", "Run reference, teacher, student and evaluation");
  tr.c.attach(tr_cmd, true);
  tr_cmd->add_option("--mode", tr.mode, "Override train.student_mode");

  Evaluate ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "Corruption errors and mCE of a checkpoint against a reference");
  ev.c.attach(ev_cmd, false);
  ev_cmd->add_option("--model", ev.model, "Model checkpoint")->required();
  ev_cmd->add_option("--reference", ev.reference, "Reference checkpoint")->required();
  ev_cmd->add_option("--data", ev.data, "Labelled target TDS file")->required();

  DdgGen dg;
  auto* dg_cmd = app.add_subcommand("ddg-gen", "Dump discrepancy-generator samples for one batch");
  dg.c.attach(dg_cmd, true);
  dg_cmd->add_option("--model", dg.model, "Model checkpoint")->required();
  dg_cmd->add_option("--source", dg.source, "Source TDS file")->required();
  dg_cmd->add_option("--data", dg.data, "Target TDS file")->required();
  dg_cmd->add_option("--delta", dg.delta, "Neighbourhood radius")->capture_default_str();
  dg_cmd->add_option("--eta", dg.eta, "Step size, or auto for 2*delta + 1/255")->capture_default_str();
  dg_cmd->add_option("--n", dg.n, "Ascent steps")->capture_default_str();
  dg_cmd->add_option("--batch", dg.batch, "Batch size")->capture_default_str();

  Validate va;
  auto* va_cmd = app.add_subcommand("validate-assumptions", "Run the monotonicity checks and the order-invariance study");
  va.c.attach(va_cmd, true);
  va_cmd->add_option("--model", va.model, "Trained checkpoint for the feature and transfer-loss checks");
  va_cmd->add_option("--source", va.source, "Source TDS file");
  va_cmd->add_option("--target", va.target, "Target TDS file");
  va_cmd->add_flag("--order-study", va.order_study, "Also train the four order-invariance regimes");
  va_cmd->add_option("--kind", va.kind, "Corruption for the order study")->capture_default_str();
  va_cmd->add_option("--epochs", va.epochs, "Epochs per order-study regime")->capture_default_str();

  Ablate ab;
  auto* ab_cmd = app.add_subcommand("ablate", "Sweep DDG delta/eta/n and report student mCE");
  ab.c.attach(ab_cmd, true);
  ab_cmd->add_option("--grid", ab.grid, "delta:eta:n points separated by ';' (eta may be auto)")->capture_default_str();

  Report rp;
  auto* rp_cmd = app.add_subcommand("report", "Merge metrics.csv files of several runs");
  rp.c.attach(rp_cmd, true);
  rp_cmd->add_option("--runs", rp.runs, "Run directories")->required()->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return kUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen, out, err);
    if (*cor_cmd) return cmd_corrupt(cor, out, err);
    if (*tr_cmd) return cmd_train(tr, out, err);
    if (*ev_cmd) return cmd_evaluate(ev, out, err);
    if (*dg_cmd) return cmd_ddg_gen(dg, out, err);
    if (*va_cmd) return cmd_validate(va, out, err);
    if (*ab_cmd) return cmd_ablate(ab, out, err);
    if (*rp_cmd) return cmd_report(rp, out, err);
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace crda::cli
