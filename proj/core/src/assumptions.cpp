#include "crda/assumptions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace crda {

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double mean_row_distance(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || a.rank() != 2) {
    throw DimensionError("feature distance: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.dim(1); ++j) {
      const double d = a.at(i, j) - b.at(i, j);
      s += d * d;
    }
    total += std::sqrt(s);
  }
  return total / static_cast<double>(a.dim(0));
}

constexpr std::array<double, kMaxSeverity> kSeverityAxis = {1, 2, 3, 4, 5};

void finish_kind(KindCurve& k, double threshold) {
  k.rho = spearman(kSeverityAxis, k.values);
  k.monotone = k.rho >= threshold;
}

Rng cell_rng(const Rng& rng, CorruptionKind kind, int t) { return rng.derive(kind_index(kind) * 8 + static_cast<std::uint64_t>(t)); }

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman: need two equal-length series of length >= 2");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

MonotonicityReport check_assumption1(const LabeledDataset& corpus, const Rng& rng, const Assumption1Thresholds& th,
                                     const SeverityTable& table) {
  if (corpus.size() < 32) {
    throw std::invalid_argument("assumption 1 needs at least 32 images, got " + std::to_string(corpus.size()));
  }
  MonotonicityReport r;
  r.quantity = "shift";
  for (CorruptionKind kind : kAllCorruptions) {
    KindCurve k{kind};
    k.values = shift_profile(kind, corpus, rng.derive(kind_index(kind)), table);
    finish_kind(k, th.rho);
    k.secondary = k.values.back() <= th.max_shift;
    r.monotone_passes += k.monotone;
    r.secondary_passes += k.secondary;
    r.kinds.push_back(k);
  }
  r.aggregate_pass = r.monotone_passes >= th.monotone_kinds && r.secondary_passes >= th.contained_kinds;
  return r;
}

MonotonicityReport check_assumption2(const Model& model, const LabeledDataset& corpus, const Rng& rng,
                                     std::size_t min_kinds) {
  MonotonicityReport r;
  r.quantity = "feature_distance";
  const double acc = 1.0 - error_rate(predict(model, corpus.images()), corpus.all_labels());
  r.flagged_untrained = acc < 2.0 / static_cast<double>(corpus.class_count());
  const Tensor clean = model.forward_features(corpus.images());
  for (CorruptionKind kind : kAllCorruptions) {
    KindCurve k{kind};
    k.anchor = mean_row_distance(clean, clean);
    for (int t = 1; t <= static_cast<int>(kMaxSeverity); ++t) {
      const Tensor c = corrupt_batch(kind, Severity(t), corpus.images(), cell_rng(rng, kind, t));
      k.values[static_cast<std::size_t>(t - 1)] = mean_row_distance(model.forward_features(c), clean);
    }
    finish_kind(k, 0.8);
    r.monotone_passes += k.monotone;
    r.kinds.push_back(k);
  }
  r.aggregate_pass = r.monotone_passes >= min_kinds;
  return r;
}

MonotonicityReport check_assumption3(const Model& model, const DomainPair& pair, const Rng& rng,
                                     const TransferLossKind& trans, std::size_t batch, std::size_t min_kinds) {
  trans.validate();
  const std::size_t batches = std::min(pair.source.size(), pair.target.size()) / std::max<std::size_t>(batch, 1);
  if (batch < 2 || batches == 0) throw std::invalid_argument("assumption 3: batch size must be in [2, dataset size]");
  MonotonicityReport r;
  r.quantity = "transfer_loss";
  const Tensor zs = model.forward_features(pair.source.images());
  const Tensor zt = model.forward_features(pair.target.images());
  std::vector<double> gammas;
  if (trans.kind == TransferKind::kMmd) gammas = median_heuristic_gammas(zs, zt, trans.bandwidths);

  auto batch_losses = [&](const Tensor& target_features) {
    std::vector<double> out(batches);
    for (std::size_t b = 0; b < batches; ++b) {
      out[b] = transfer_loss(trans, zs.slice_rows(b * batch, (b + 1) * batch),
                             target_features.slice_rows(b * batch, (b + 1) * batch), gammas)
                   .value;
    }
    return out;
  };
  auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); };

  const std::vector<double> clean = batch_losses(zt);
  double premise_total = 0.0;
  for (CorruptionKind kind : kAllCorruptions) {
    KindCurve k{kind};
    k.anchor = mean(clean);
    std::vector<double> last;
    for (int t = 1; t <= static_cast<int>(kMaxSeverity); ++t) {
      const Tensor c = corrupt_batch(kind, Severity(t), pair.target.images(), cell_rng(rng, kind, t));
      last = batch_losses(model.forward_features(c));
      k.values[static_cast<std::size_t>(t - 1)] = mean(last);
    }
    std::size_t above = 0;
    for (std::size_t b = 0; b < batches; ++b) above += last[b] >= clean[b];
    k.premise_fraction = static_cast<double>(above) / static_cast<double>(batches);
    premise_total += k.premise_fraction;
    finish_kind(k, 0.8);
    k.secondary = k.premise_fraction >= 0.5;
    r.monotone_passes += k.monotone;
    r.secondary_passes += k.secondary;
    r.kinds.push_back(k);
  }
  r.premise_fraction = premise_total / static_cast<double>(kCorruptionCount);
  r.aggregate_pass = r.monotone_passes >= min_kinds;
  return r;
}

std::string_view regime_name(RegimeTag tag) {
  switch (tag) {
    case RegimeTag::kClean: return "clean";
    case RegimeTag::kAllLevels: return "all_levels";
    case RegimeTag::kCleanPlusLevel5: return "clean_plus_level5";
    case RegimeTag::kLevel5: return "level5";
  }
  return "?";
}

std::vector<int> regime_severities(RegimeTag tag) {
  switch (tag) {
    case RegimeTag::kClean: return {};
    case RegimeTag::kAllLevels: return {0, 1, 2, 3, 4, 5};
    case RegimeTag::kCleanPlusLevel5: return {0, 5};
    case RegimeTag::kLevel5: return {5};
  }
  return {};
}

std::vector<RegimeCurve> order_invariance_study(const LabeledDataset& domain, CorruptionKind kind, const Rng& rng,
                                                const OrderStudyConfig& cfg) {
  if (domain.size() < cfg.batch_size || cfg.epochs == 0 || cfg.batch_size == 0) {
    throw std::invalid_argument("order study: need epochs > 0 and at least one full batch");
  }
  Rng init = rng.derive(stream::kInit);
  const Model initial = Model::reference_architecture(domain.class_count(), init, domain.image_shape(), cfg.feature_dim);
  const Shape image_shape = domain.image_shape();
  const std::vector<std::uint32_t> labels = domain.all_labels();

  // Evaluation images are shared across regimes.
  std::array<Tensor, kMaxSeverity + 1> probes;
  probes[0] = domain.images();
  for (int t = 1; t <= static_cast<int>(kMaxSeverity); ++t)
    probes[static_cast<std::size_t>(t)] = corrupt_batch(kind, Severity(t), domain.images(), rng.derive(stream::kEval).derive(static_cast<std::uint64_t>(t)));

  std::vector<RegimeCurve> out;
  for (RegimeTag regime : kAllRegimes) {
    Model m = initial;
    RegimeCurve curve{regime};
    curve.init_hash = m.parameter_hash();
    const std::vector<int> severities = regime_severities(regime);
    Sgd opt(cfg.lr, cfg.momentum, cfg.weight_decay);
    const Rng aug = rng.derive(stream::kAugment).derive(static_cast<std::uint64_t>(regime));
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::vector<std::size_t> perm(domain.size());
      std::iota(perm.begin(), perm.end(), 0);
      Rng shuffle = rng.derive(stream::kShuffle).derive(epoch);
      shuffle.shuffle(std::span<std::size_t>(perm));
      for (std::size_t b = 0; b < perm.size(); b += cfg.batch_size) {
        const std::vector<std::size_t> idx(perm.begin() + static_cast<std::ptrdiff_t>(b),
                                           perm.begin() + static_cast<std::ptrdiff_t>(std::min(perm.size(), b + cfg.batch_size)));
        const Tensor x = domain.batch(idx);
        std::vector<std::uint32_t> y(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) y[i] = labels[idx[i]];
        const ForwardPass p = m.forward(x, true);
        const LossGrad cl = cls_loss(p.logits(), y);
        Gradients g = m.backward(p, nullptr, &cl.grad, false);
        if (!severities.empty()) {
          Tensor xc(x.shape());
          const Rng step_rng = aug.derive(epoch * 1'000'000 + b);
          for (std::size_t i = 0; i < idx.size(); ++i) {
            Rng r = step_rng.derive(i);
            const int t = severities[r.below(severities.size())];
            const auto row = x.row(i);
            const Tensor img(image_shape, std::vector<double>(row.begin(), row.end()));
            const Tensor c = apply_corruption(kind, Severity(t), img, r);
            std::copy(c.data().begin(), c.data().end(), xc.row(i).begin());
          }
          const ForwardPass pc = m.forward(xc, false);
          const LossGrad con = contrastive_loss(pc.features(), p.features(), ContrastiveConfig{cfg.tau});
          Gradients gc = m.backward(pc, &con.grad, nullptr, false);
          gc.scale(cfg.lambda);
          g.accumulate(gc);
        }
        if (!g.all_finite()) throw NumericError("order study diverged in regime " + std::string(regime_name(regime)));
        opt.step(m, g);
      }
    }
    const Tensor clean = m.forward_features(probes[0]);
    for (std::size_t t = 0; t <= kMaxSeverity; ++t) curve.distance[t] = mean_row_distance(m.forward_features(probes[t]), clean);
    constexpr std::array<double, kMaxSeverity + 1> axis = {0, 1, 2, 3, 4, 5};
    curve.rho = spearman(axis, curve.distance);
    curve.clean_accuracy = 1.0 - error_rate(predict(m, probes[0]), labels);
    out.push_back(curve);
  }
  return out;
}

std::vector<AblationRow> ablation_sweep(const DomainPair& pair, const ExperimentConfig& base,
                                        std::span<const AblationPoint> grid) {
  if (grid.empty()) throw std::invalid_argument("ablation grid is empty");
  TrainConfig cfg = base.train;
  cfg.student_mode = StudentMode::kDdg;
  for (const AblationPoint& p : grid) {
    DdgConfig d{p.delta, p.eta, p.n, cfg.ddg.random_start};
    d.validate();
  }
  const Model reference = train_reference(pair, cfg);
  const TeacherState teacher = train_teacher(pair, cfg, nullptr, &reference);
  const Rng eval = Rng(cfg.seed).derive(stream::kEval);
  const std::size_t threads = std::min(base.eval_threads, env_threads());
  const ErrorGrid ref_grid = error_grid(reference, pair.target, eval, threads);

  std::vector<AblationRow> rows;
  for (const AblationPoint& p : grid) {
    TrainConfig point = cfg;
    point.ddg.delta = p.delta;
    point.ddg.eta = p.eta;
    point.ddg.steps = p.n;
    const Model student = train_student(pair, teacher, point, nullptr);
    const ErrorGrid g = error_grid(student, pair.target, eval, threads);
    rows.push_back({p.delta, point.ddg.effective_eta(), p.n, ce(g, ref_grid).mce, g.clean_accuracy()});
  }
  return rows;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
  std::string out = "delta,eta,n,mCE,clean_acc\n";
  for (const AblationRow& r : rows) {
    out += format_double(r.delta) + "," + format_double(r.eta) + "," + std::to_string(r.n) + "," + format_double(r.mce) +
           "," + format_double(r.clean_acc) + "\n";
  }
  return out;
}

std::string assumptions_csv(std::span<const MonotonicityReport> reports) {
  std::string out = "quantity,kind,t0,t1,t2,t3,t4,t5,rho,monotone,secondary\n";
  for (const MonotonicityReport& r : reports) {
    for (const KindCurve& k : r.kinds) {
      out += r.quantity + "," + std::string(corruption_name(k.kind)) + "," + format_double(k.anchor);
      for (double v : k.values) out += "," + format_double(v);
      out += "," + format_double(k.rho) + "," + (k.monotone ? "1" : "0") + "," + (k.secondary ? "1" : "0") + "\n";
    }
  }
  return out;
}

std::string order_study_csv(std::span<const RegimeCurve> curves) {
  std::string out = "regime,t,distance\n";
  for (const RegimeCurve& c : curves)
    for (std::size_t t = 0; t < c.distance.size(); ++t)
      out += std::string(regime_name(c.regime)) + "," + std::to_string(t) + "," + format_double(c.distance[t]) + "\n";
  return out;
}

}  // namespace crda
