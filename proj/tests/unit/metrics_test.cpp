#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "crda/metrics.hpp"
#include "crda/synthetic.hpp"

namespace crda {
namespace {

ErrorGrid filled_grid(Rng& rng, double lo = 0.05, double hi = 0.95) {
  ErrorGrid g;
  for (auto& row : g.error)
    for (double& e : row) e = rng.uniform(lo, hi);
  g.clean_error = rng.uniform(lo, hi);
  return g;
}

Model zero_head_model(std::size_t classes, Shape input) {
  Rng rng(1);
  Model m = Model::reference_architecture(classes, rng, input, 8);
  for (Tensor* p : m.classifier_network().parameters()) *p = Tensor(p->shape());
  return m;
}

TEST(Ce, SelfReferenceIsOne) {
  Rng rng(1);
  const ErrorGrid g = filled_grid(rng);
  const CeReport r = ce(g, g);
  for (const auto& v : r.ce) EXPECT_EQ(*v, 1.0);
  EXPECT_EQ(r.mce, 1.0);
  EXPECT_TRUE(r.excluded.empty());
}

TEST(Ce, HalfErrorsGiveHalf) {
  Rng rng(2);
  const ErrorGrid ref = filled_grid(rng);
  ErrorGrid half = ref;
  for (auto& row : half.error)
    for (double& e : row) e *= 0.5;
  const CeReport r = ce(half, ref);
  for (const auto& v : r.ce) EXPECT_NEAR(*v, 0.5, 1e-15);
  EXPECT_NEAR(r.mce, 0.5, 1e-15);
  EXPECT_EQ(ce(ErrorGrid{}, ref).mce, 0.0);
}

TEST(Ce, MceIsMeanOfKinds) {
  Rng rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    const CeReport r = ce(filled_grid(rng), filled_grid(rng));
    double sum = 0;
    for (const auto& v : r.ce) {
      ASSERT_GE(*v, 0.0);
      sum += *v;
    }
    EXPECT_NEAR(r.mce, sum / 15.0, 1e-12);
  }
}

TEST(Ce, ScaleConsistent) {
  Rng rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    const ErrorGrid a = filled_grid(rng, 0.05, 0.45), b = filled_grid(rng, 0.05, 0.45);
    ErrorGrid a2 = a, b2 = b;
    for (std::size_t k = 0; k < 15; ++k)
      for (std::size_t t = 0; t < 5; ++t) {
        a2.error[k][t] *= 2.0;
        b2.error[k][t] *= 2.0;
      }
    const CeReport r = ce(a, b), r2 = ce(a2, b2);
    for (std::size_t k = 0; k < 15; ++k) EXPECT_EQ(*r.ce[k], *r2.ce[k]);
  }
}

TEST(Ce, ZeroReferenceKindExcluded) {
  Rng rng(5);
  ErrorGrid ref = filled_grid(rng);
  ref.error[kind_index(CorruptionKind::kFog)].fill(0.0);
  const ErrorGrid model = filled_grid(rng);
  const CeReport r = ce(model, ref);
  ASSERT_EQ(r.excluded, std::vector<CorruptionKind>{CorruptionKind::kFog});
  EXPECT_FALSE(r.ce[kind_index(CorruptionKind::kFog)].has_value());
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("fog"), std::string::npos);
  double sum = 0;
  for (const auto& v : r.ce)
    if (v) sum += *v;
  EXPECT_NEAR(r.mce, sum / 14.0, 1e-12);
  EXPECT_THROW(ce(model, ErrorGrid{}), std::invalid_argument);
}

TEST(Ce, MetricsCsvLayout) {
  Rng rng(6);
  const ErrorGrid g = filled_grid(rng);
  const CeReport reports[] = {ce(g, g, "teacher", "reference")};
  std::istringstream in(metrics_csv(reports));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "model,kind,CE");
  std::getline(in, line);
  EXPECT_EQ(line, "teacher,gaussian_noise,1");
  int rows = 0;
  std::string last;
  while (std::getline(in, line)) {
    ++rows;
    last = line;
  }
  EXPECT_EQ(rows, 15);
  EXPECT_EQ(last, "teacher,mCE,1");
}

TEST(ErrorGridEval, ConstantLabelsAndConstantModelGiveZero) {
  const Model m = zero_head_model(3, {3, 8, 8});
  Rng rng(7);
  const LabeledDataset ds(uniform(rng, {6, 3, 8, 8}, 0, 1), std::vector<std::uint32_t>(6, 0), 3, "t");
  const ErrorGrid g = error_grid(m, ds, Rng(1));
  EXPECT_EQ(g.clean_error, 0.0);
  for (const auto& row : g.error)
    for (double e : row) EXPECT_EQ(e, 0.0);
}

TEST(ErrorGridEval, RandomLabelsNearChance) {
  Rng rng(8);
  Rng init(9);
  const Model m = Model::reference_architecture(5, init, {3, 8, 8}, 8);
  const std::size_t n = 400;
  std::vector<std::uint32_t> labels(n);
  for (auto& y : labels) y = static_cast<std::uint32_t>(rng.below(5));
  const LabeledDataset ds(uniform(rng, {n, 3, 8, 8}, 0, 1), labels, 5, "t");
  const ErrorGrid g = error_grid(m, ds, Rng(2));
  const double p = 0.8, sigma = std::sqrt(p * (1 - p) / static_cast<double>(n));
  EXPECT_NEAR(g.clean_error, p, 3 * sigma);
  EXPECT_NEAR(g.at(CorruptionKind::kBrightness, 3), p, 3 * sigma);
}

TEST(ErrorGridEval, DeterministicThreadedAndNonMutating) {
  Rng rng(10);
  SynthSpec spec;
  spec.classes = 4;
  spec.samples_per_domain = 24;
  spec.height = 16;
  spec.width = 16;
  const DomainPair pair = generate_synthetic_pair(rng, spec);
  Rng init(11);
  const Model a = Model::reference_architecture(4, init, {3, 16, 16}, 8);
  const Model b = Model::reference_architecture(4, init, {3, 16, 16}, 8);
  const std::uint64_t hash = a.parameter_hash();
  const Model* models[] = {&a, &b};
  const auto serial = error_grids(models, pair.target, Rng(5), 1);
  const auto threaded = error_grids(models, pair.target, Rng(5), 3);
  EXPECT_EQ(a.parameter_hash(), hash);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(serial[i].error, threaded[i].error);
    EXPECT_EQ(serial[i].clean_error, threaded[i].clean_error);
    EXPECT_NO_THROW(serial[i].validate());
  }
  EXPECT_EQ(error_grid(b, pair.target, Rng(5)).error, serial[1].error);
}

// Tag balance and attribute quoting; enough to catch malformed output.
bool well_formed_xml(const std::string& s) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  while ((i = s.find('<', i)) != std::string::npos) {
    const std::size_t end = s.find('>', i);
    if (end == std::string::npos) return false;
    std::string tag = s.substr(i + 1, end - i - 1);
    i = end + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?' || tag[0] == '!') continue;
    if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) return false;
    if (tag.back() == '/') continue;
    if (tag[0] == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
    } else {
      stack.push_back(tag.substr(0, tag.find_first_of(" \t\n")));
    }
  }
  return stack.empty();
}

TEST(SeverityCurves, CsvCountsAndWellFormedSvg) {
  Rng rng(12);
  const std::pair<std::string, ErrorGrid> grids[] = {{"teacher", filled_grid(rng)}, {"a<b&c", filled_grid(rng)}};
  const CurveArtifacts art = severity_curves(grids);
  std::istringstream in(art.csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "label,kind,t,error");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2 * 15 * 5 + 2);
  EXPECT_TRUE(well_formed_xml(art.svg));
  EXPECT_NE(art.svg.find("a&lt;b&amp;c"), std::string::npos);
  EXPECT_THROW(severity_curves({}), std::invalid_argument);
}

TEST(Format, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(std::stod(format_double(0.1 + 0.2)), 0.1 + 0.2);
}

}  // namespace
}  // namespace crda
