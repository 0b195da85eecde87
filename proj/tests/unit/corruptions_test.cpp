#include <gtest/gtest.h>

#include <cmath>

#include "crda/assumptions.hpp"
#include "crda/corruptions.hpp"
#include "crda/synthetic.hpp"

namespace crda {
namespace {

Tensor random_image(Rng& rng, std::size_t h = 16, std::size_t w = 16) { return uniform(rng, {3, h, w}, 0.0, 1.0); }

TEST(Corruption, NamesRoundTrip) {
  EXPECT_EQ(kAllCorruptions.size(), 15u);
  for (CorruptionKind k : kAllCorruptions) EXPECT_EQ(parse_corruption(corruption_name(k)), k);
  EXPECT_EQ(corruption_name(CorruptionKind::kGaussianNoise), "gaussian_noise");
  EXPECT_FALSE(parse_corruption("speckle_noise").has_value());
}

TEST(Corruption, SeverityRange) {
  EXPECT_NO_THROW(Severity(0));
  EXPECT_NO_THROW(Severity(5));
  EXPECT_THROW(Severity(6), std::invalid_argument);
  EXPECT_THROW(Severity(-1), std::invalid_argument);
}

TEST(Corruption, TableStrictlyMonotoneInDistortion) {
  const SeverityTable& table = SeverityTable::defaults();
  for (CorruptionKind k : kAllCorruptions) {
    const int dir = SeverityTable::direction(k);
    for (int t = 1; t < 5; ++t)
      EXPECT_GT(dir * table.at(k, Severity(t + 1)).primary, dir * table.at(k, Severity(t)).primary)
          << corruption_name(k) << " t=" << t;
  }
}

TEST(Corruption, LevelZeroIsIdentity) {
  Rng rng(1);
  const Tensor x = random_image(rng);
  for (CorruptionKind k : kAllCorruptions) {
    Rng r(2);
    EXPECT_EQ(apply_corruption(k, Severity(0), x, r), x) << corruption_name(k);
  }
}

TEST(Corruption, RangePreservedOnExtremeInputs) {
  Rng rng(3);
  std::vector<Tensor> inputs = {Tensor({3, 16, 16}, 0.0), Tensor({3, 16, 16}, 1.0), random_image(rng)};
  Tensor binary = random_image(rng);
  for (double& v : binary.data()) v = v < 0.5 ? 0.0 : 1.0;
  inputs.push_back(binary);
  for (const Tensor& x : inputs)
    for (CorruptionKind k : kAllCorruptions)
      for (int t = 1; t <= 5; ++t) {
        Rng r(static_cast<std::uint64_t>(t));
        const Tensor y = apply_corruption(k, Severity(t), x, r);
        ASSERT_EQ(y.shape(), x.shape());
        for (double v : y.data()) ASSERT_TRUE(v >= 0.0 && v <= 1.0) << corruption_name(k) << " t=" << t;
      }
}

TEST(Corruption, RejectsBadInput) {
  Rng rng(4);
  EXPECT_THROW(apply_corruption(CorruptionKind::kFog, Severity(1), Tensor({3, 4, 4}, 1.5), rng),
               std::invalid_argument);
  EXPECT_THROW(apply_corruption(CorruptionKind::kFog, Severity(1), Tensor({4, 4}, 0.5), rng), DimensionError);
}

TEST(Corruption, NeutralContrastIsExact) {
  SeverityTable table = SeverityTable::defaults();
  table.levels[kind_index(CorruptionKind::kContrast)][2].primary = 1.0;
  Rng rng(5);
  const Tensor x = random_image(rng);
  EXPECT_EQ(apply_corruption(CorruptionKind::kContrast, Severity(3), x, rng, table), x);
}

TEST(Corruption, PixelateIsBlockMean) {
  Rng rng(6);
  const Tensor x = random_image(rng, 12, 12);
  const int t = 1;
  const std::size_t b = static_cast<std::size_t>(SeverityTable::defaults().at(CorruptionKind::kPixelate, Severity(t)).primary);
  const Tensor y = apply_corruption(CorruptionKind::kPixelate, Severity(t), x, rng);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t by = 0; by + b <= 12; by += b)
      for (std::size_t bx = 0; bx + b <= 12; bx += b) {
        double mean = 0;
        for (std::size_t i = 0; i < b; ++i)
          for (std::size_t j = 0; j < b; ++j) mean += x[c * 144 + (by + i) * 12 + bx + j];
        mean /= static_cast<double>(b * b);
        for (std::size_t i = 0; i < b; ++i)
          for (std::size_t j = 0; j < b; ++j) ASSERT_NEAR(y[c * 144 + (by + i) * 12 + bx + j], mean, 1e-12);
      }
}

TEST(Corruption, DeterministicKindsIgnoreRng) {
  Rng rng(7);
  const Tensor x = random_image(rng);
  for (CorruptionKind k : kAllCorruptions) {
    if (is_stochastic(k)) continue;
    Rng a(1), b(999);
    EXPECT_EQ(apply_corruption(k, Severity(3), x, a), apply_corruption(k, Severity(3), x, b)) << corruption_name(k);
    EXPECT_EQ(a.counter(), 0u) << corruption_name(k);
  }
}

TEST(Corruption, FixedRngIsDeterministic) {
  Rng rng(8);
  const Tensor x = random_image(rng);
  for (CorruptionKind k : kAllCorruptions) {
    Rng a(42), b(42);
    EXPECT_EQ(apply_corruption(k, Severity(4), x, a), apply_corruption(k, Severity(4), x, b)) << corruption_name(k);
  }
}

TEST(Corruption, CorruptBatchUsesPerImageStreams) {
  Rng rng(9);
  const Tensor batch = uniform(rng, {3, 3, 8, 8}, 0, 1);
  const Rng root(10);
  const Tensor out = corrupt_batch(CorruptionKind::kGaussianNoise, Severity(2), batch, root);
  Rng r1 = root.derive(1);
  const Tensor one = apply_corruption(CorruptionKind::kGaussianNoise, Severity(2), batch.slice_rows(1, 2).reshaped({3, 8, 8}), r1);
  for (std::size_t i = 0; i < one.size(); ++i) EXPECT_EQ(out[192 + i], one[i]);
}

TEST(AverageShift, Examples) {
  const Tensor a({3, 2, 2}, 0.5);
  EXPECT_EQ(average_shift(a, a), 0.0);
  EXPECT_NEAR(average_shift(a, Tensor({3, 2, 2}, 0.6)), 0.1, 1e-15);
  EXPECT_THROW(average_shift(a, Tensor({3, 2, 3}, 0.5)), DimensionError);
}

class ShiftProfile : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    Rng rng(1);
    SynthSpec spec;
    spec.samples_per_domain = 48;
    corpus_ = new LabeledDataset(generate_synthetic_pair(rng, spec).target);
  }
  static void TearDownTestSuite() { delete corpus_; }
  static std::array<double, 5> profile(CorruptionKind k) { return shift_profile(k, *corpus_, Rng(77)); }
  static LabeledDataset* corpus_;
};
LabeledDataset* ShiftProfile::corpus_ = nullptr;

TEST_F(ShiftProfile, BrightnessStrictlyIncreasing) {
  const auto p = profile(CorruptionKind::kBrightness);
  for (int t = 1; t < 5; ++t) EXPECT_GT(p[t], p[t - 1]);
}

TEST_F(ShiftProfile, GaussianNoiseBracket) {
  const double s5 = profile(CorruptionKind::kGaussianNoise)[4];
  EXPECT_GE(s5, 0.10);
  EXPECT_LE(s5, 0.34);
}

TEST_F(ShiftProfile, JpegAtMostTenPercent) { EXPECT_LE(profile(CorruptionKind::kJpegCompression)[4], 0.10); }

TEST_F(ShiftProfile, MostKindsNondecreasingAndContained) {
  std::size_t monotone = 0, contained = 0;
  for (CorruptionKind k : kAllCorruptions) {
    const auto p = profile(k);
    bool nondecreasing = true;
    for (int t = 1; t < 5; ++t) nondecreasing = nondecreasing && p[t] >= p[t - 1];
    monotone += nondecreasing;
    contained += p[4] <= 0.26;
  }
  EXPECT_GE(monotone, 13u);
  EXPECT_GE(contained, 12u);
}

}  // namespace
}  // namespace crda
