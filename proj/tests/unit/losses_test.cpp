#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "crda/losses.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

namespace crda {
namespace {

constexpr double kTol = 1e-4;

TEST(ClsLoss, UniformLogitsGiveLogS) {
  const Tensor logits({3, 4}, 0.7);
  const std::uint32_t y[] = {0, 1, 3};
  EXPECT_NEAR(cls_loss(logits, y).value, std::log(4.0), 1e-12);
}

TEST(ClsLoss, VanishesWithMargin) {
  const std::uint32_t y[] = {1};
  double prev = 1e9;
  for (double margin : {1.0, 5.0, 20.0, 40.0}) {
    const double v = cls_loss(Tensor({1, 3}, {0.0, margin, 0.0}), y).value;
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_LT(prev, 1e-15);
}

TEST(ClsLoss, MatchesPerSampleFormula) {
  Rng rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    const Tensor logits = uniform(rng, {5, 6}, -4, 4);
    std::vector<std::uint32_t> y(5);
    for (auto& l : y) l = static_cast<std::uint32_t>(rng.below(6));
    double expected = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      double z = 0;
      for (std::size_t k = 0; k < 6; ++k) z += std::exp(logits.at(i, k));
      expected += -std::log(std::exp(logits.at(i, y[i])) / z);
    }
    EXPECT_NEAR(cls_loss(logits, y).value, expected / 5, 1e-12);
  }
}

TEST(ClsLoss, RejectsBadLabels) {
  const std::uint32_t y[] = {4};
  EXPECT_THROW(cls_loss(Tensor({1, 4}), y), std::invalid_argument);
  const std::uint32_t two[] = {0, 1};
  EXPECT_THROW(cls_loss(Tensor({1, 4}), two), DimensionError);
}

TEST(Mmd, IdenticalBatchesGiveZero) {
  Rng rng(2);
  const Tensor a = uniform(rng, {6, 4}, -1, 1);
  const double g[] = {0.5, 2.0};
  EXPECT_NEAR(mmd2(a, a, g).value, 0.0, 1e-12);
}

TEST(Mmd, SinglePointClosedForm) {
  const double g[] = {1.0};
  EXPECT_NEAR(mmd2(Tensor({1, 2}, {0, 0}), Tensor({1, 2}, {1, 0}), g).value, 2 - 2 * std::exp(-1.0), 1e-15);
}

TEST(Mmd, PermutationInvariantAndNonnegative) {
  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const Tensor zs = uniform(rng, {5, 3}, -1, 1);
    const Tensor zt = uniform(rng, {4, 3}, -1, 1);
    const double g[] = {0.25, 1.0, 4.0};
    const double v = mmd2(zs, zt, g).value;
    EXPECT_GE(v, -1e-12);
    const std::size_t perm[] = {3, 1, 4, 0, 2};
    EXPECT_NEAR(mmd2(zs.gather_rows(perm), zt, g).value, v, 1e-12);
  }
}

TEST(Mmd, Errors) {
  const double g[] = {1.0};
  EXPECT_THROW(mmd2(Tensor({2, 3}), Tensor({2, 4}), g), DimensionError);
  const double bad[] = {0.0};
  EXPECT_THROW(mmd2(Tensor({2, 3}), Tensor({2, 3}), bad), std::invalid_argument);
  EXPECT_THROW(mmd2(Tensor({2, 3}), Tensor({2, 3}), {}), std::invalid_argument);
}

TEST(Adversarial, ZeroDiscriminatorGivesLn2) {
  Rng rng(4);
  Model disc = Model::discriminator(4, 5, rng);
  for (Tensor* p : disc.parameters()) *p = Tensor(p->shape());
  const AdversarialResult r =
      adversarial_trans(uniform(rng, {3, 4}, -1, 1), uniform(rng, {5, 4}, -1, 1), disc, AdversarialMode::kTrainDisc);
  EXPECT_NEAR(r.value, std::numbers::ln2, 1e-15);
}

TEST(Adversarial, ConfuseReversesFeatureGradient) {
  Rng rng(5);
  const Model disc = Model::discriminator(4, 6, rng);
  const Tensor zs = uniform(rng, {3, 4}, -1, 1), zt = uniform(rng, {2, 4}, -1, 1);
  const AdversarialResult a = adversarial_trans(zs, zt, disc, AdversarialMode::kTrainDisc);
  const AdversarialResult b = adversarial_trans(zs, zt, disc, AdversarialMode::kConfuse);
  EXPECT_EQ(a.value, b.value);
  for (std::size_t i = 0; i < zs.size(); ++i) EXPECT_EQ(b.grad_source[i], -a.grad_source[i]);
  for (std::size_t i = 0; i < zt.size(); ++i) EXPECT_EQ(b.grad_target[i], -a.grad_target[i]);
}

TEST(Adversarial, SeparableBlobsTrainToNearZero) {
  Rng rng(6);
  Model disc = Model::discriminator(3, 8, rng);
  Tensor zs = uniform(rng, {16, 3}, -0.3, 0.3), zt = uniform(rng, {16, 3}, -0.3, 0.3);
  for (std::size_t i = 0; i < 16; ++i) {
    zs.at(i, 0) += 1.0;
    zt.at(i, 0) -= 1.0;
  }
  Sgd opt(0.5, 0.9, 0.0);
  for (int step = 0; step < 200; ++step) opt.step(disc, adversarial_trans(zs, zt, disc, AdversarialMode::kTrainDisc).disc_grads);
  EXPECT_LT(adversarial_trans(zs, zt, disc, AdversarialMode::kTrainDisc).value, 0.05);
}

TEST(Adversarial, DimensionMismatch) {
  Rng rng(7);
  const Model disc = Model::discriminator(4, 6, rng);
  EXPECT_THROW(adversarial_trans(Tensor({2, 3}), Tensor({2, 3}), disc, AdversarialMode::kConfuse), DimensionError);
}

TEST(SimLoss, DegenerateCases) {
  const ContrastiveConfig cfg{0.2};
  Rng rng(8);
  const Tensor two = uniform(rng, {2, 5}, -1, 1);
  EXPECT_EQ(sim_loss(0, 1, two, cfg), 0.0);
  EXPECT_NEAR(sim_loss(0, 3, Tensor({4, 3}, 0.4), cfg), std::log(3.0), 1e-12);
  EXPECT_THROW(sim_loss(1, 1, two, cfg), std::invalid_argument);
  EXPECT_THROW(sim_loss(0, 1, Tensor({2, 3}), cfg), std::invalid_argument);
}

TEST(SimLoss, MatchesBruteForceAndIsAsymmetric) {
  Rng rng(9);
  const ContrastiveConfig cfg{0.2};
  const Tensor z = uniform(rng, {6, 4}, -1, 1);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < 6; ++i) rows.emplace_back(z.row(i).begin(), z.row(i).end());
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      if (i != j) {
        EXPECT_NEAR(sim_loss(i, j, z, cfg), testing::brute_pair_loss(rows, i, j, 0.2), 1e-12);
      }
  EXPECT_NE(sim_loss(0, 1, z, cfg), sim_loss(1, 0, z, cfg));
}

TEST(SimLoss, CosineScaleInvariance) {
  Rng rng(10);
  const std::vector<double> a = {0.3, -1.2, 0.5}, b = {1.0, 0.1, -0.4};
  std::vector<double> a3 = a;
  for (double& v : a3) v *= 3.0;
  EXPECT_NEAR(cosine_similarity(a3, b), cosine_similarity(a, b), 1e-15);
}

TEST(Contrastive, MatchesBruteForce) {
  Rng rng(11);
  for (std::size_t n : {1u, 2u, 3u, 5u})
    for (int rep = 0; rep < 50; ++rep) {
      const Tensor s = uniform(rng, {n, 6}, -1, 1), t = uniform(rng, {n, 6}, -1, 1);
      EXPECT_NEAR(contrastive_loss(s, t, {0.2}).value, testing::brute_contrastive(s, t, 0.2), 1e-9);
    }
}

TEST(Contrastive, DegenerateValues) {
  Rng rng(12);
  EXPECT_EQ(contrastive_loss(uniform(rng, {1, 4}, -1, 1), uniform(rng, {1, 4}, -1, 1), {0.2}).value, 0.0);
  const Tensor same({2, 4}, 0.25);
  EXPECT_NEAR(contrastive_loss(same, same, {0.2}).value, std::log(3.0), 1e-12);
}

TEST(Contrastive, SwapSymmetricValue) {
  Rng rng(13);
  const Tensor a = uniform(rng, {4, 5}, -1, 1), b = uniform(rng, {4, 5}, -1, 1);
  EXPECT_NEAR(contrastive_loss(a, b, {0.2}).value, contrastive_loss(b, a, {0.2}).value, 1e-12);
}

TEST(Contrastive, Errors) {
  EXPECT_THROW(contrastive_loss(Tensor({2, 3}, 1.0), Tensor({3, 3}, 1.0), {0.2}), DimensionError);
  EXPECT_THROW(contrastive_loss(Tensor({2, 3}, 1.0), Tensor({2, 3}, 1.0), {0.0}), std::invalid_argument);
}

TEST(TotalLoss, Arithmetic) {
  EXPECT_EQ(kDefaultLambda, 0.5);
  EXPECT_EQ(ContrastiveConfig{}.tau, 0.2);
  EXPECT_EQ(total_loss(1, 2, 4).total, 5.0);
  EXPECT_EQ(total_loss(1, 2, 4, 0.0).total, 3.0);
  EXPECT_THROW(total_loss(1, 2, 4, -1.0), std::invalid_argument);
}

TEST(GradCheck, AllLosses) {
  Rng rng(14);
  for (int rep = 0; rep < 5; ++rep) {
    for (const auto& w : {testing::check_cls(rng), testing::check_mmd(rng), testing::check_contrastive(rng),
                          testing::check_adversarial(rng, AdversarialMode::kTrainDisc),
                          testing::check_adversarial(rng, AdversarialMode::kConfuse)})
      EXPECT_LE(w.rel, kTol) << w.where;
  }
}

TEST(TransferLoss, ValidateAndDispatch) {
  TransferLossKind k;
  EXPECT_NO_THROW(k.validate());
  k.bandwidths = {};
  EXPECT_THROW(k.validate(), std::invalid_argument);
  TransferLossKind adv{TransferKind::kAdversarial, {}, nullptr, 1.0};
  EXPECT_THROW(adv.validate(), std::invalid_argument);

  Rng rng(15);
  const Tensor zs = uniform(rng, {4, 3}, -1, 1), zt = uniform(rng, {4, 3}, -1, 1);
  const double g[] = {0.7};
  EXPECT_EQ(transfer_loss(TransferLossKind{}, zs, zt, g).value, mmd2(zs, zt, g).value);
  const Model disc = Model::discriminator(3, 4, rng);
  adv.discriminator = &disc;
  EXPECT_NEAR(transfer_loss(adv, zs, zt).value, -adversarial_trans(zs, zt, disc, AdversarialMode::kTrainDisc).value,
              1e-15);
}

}  // namespace
}  // namespace crda
