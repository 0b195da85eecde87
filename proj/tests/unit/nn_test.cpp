#include <gtest/gtest.h>

#include <cmath>

#include "crda/dataset.hpp"
#include "crda/nn.hpp"
#include "gradcheck.hpp"
#include "tempdir.hpp"

namespace crda {
namespace {

constexpr double kTol = 1e-4;

TEST(GradCheck, EveryLayerKind) {
  Rng rng(101);
  for (int rep = 0; rep < 3; ++rep) {
    Rng init = rng.derive(static_cast<std::uint64_t>(rep));
    const auto conv = testing::check_layer(make_conv3x3(2, 3, init), {2, 5, 6}, 2, rng);
    EXPECT_LE(conv.rel, kTol) << conv.where;
    const auto affine = testing::check_layer(make_affine(6, 4, init), {6}, 3, rng);
    EXPECT_LE(affine.rel, kTol) << affine.where;
    const auto relu = testing::check_layer(ReLU{}, {7}, 3, rng);
    EXPECT_LE(relu.rel, kTol) << relu.where;
    const auto pool = testing::check_layer(MaxPool2{}, {2, 4, 6}, 2, rng);
    EXPECT_LE(pool.rel, kTol) << pool.where;
    const auto gap = testing::check_layer(GlobalAvgPool{}, {3, 3, 5}, 2, rng);
    EXPECT_LE(gap.rel, kTol) << gap.where;
    const auto l2 = testing::check_layer(L2Normalize{}, {5}, 3, rng);
    EXPECT_LE(l2.rel, kTol) << l2.where;
    const auto gain = testing::check_layer(Gain{2.5}, {4}, 2, rng);
    EXPECT_LE(gain.rel, kTol) << gain.where;
  }
}

TEST(GradCheck, FullReferenceNetwork) {
  Rng rng(102);
  const auto w = testing::check_model(rng);
  EXPECT_LE(w.rel, kTol) << w.where;
}

TEST(Model, FeaturesAreUnitNorm) {
  Rng rng(1);
  const Model m = Model::reference_architecture(5, rng, {3, 8, 8}, 16);
  const Tensor z = m.forward_features(uniform(rng, {6, 3, 8, 8}, 0, 1));
  ASSERT_EQ(z.shape(), (Shape{6, 16}));
  for (std::size_t i = 0; i < 6; ++i) {
    double s = 0;
    for (double v : z.row(i)) s += v * v;
    EXPECT_NEAR(std::sqrt(s), 1.0, 1e-9);
  }
}

TEST(Model, ReferenceParameterCount) {
  Rng rng(1);
  const Model m = Model::reference_architecture(10, rng);
  // conv 3->8, conv 8->16, affine 16->64, affine 64->10
  EXPECT_EQ(m.parameter_count(), (8 * 3 * 9 + 8) + (16 * 8 * 9 + 16) + (64 * 16 + 64) + (10 * 64 + 10));
  EXPECT_EQ(m.feature_dim(), 64u);
  EXPECT_EQ(m.output_dim(), 10u);
}

TEST(Model, PureAndDuplicateRowsAgree) {
  Rng rng(2);
  const Model m = Model::reference_architecture(4, rng, {3, 8, 8}, 8);
  Tensor x = uniform(rng, {1, 3, 8, 8}, 0, 1);
  x = concat_rows(x, x);
  const Tensor z = m.forward_features(x);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(z.at(0, k), z.at(1, k));
  EXPECT_EQ(m.forward_features(x), z);
}

TEST(Model, ZeroConvGivesConstantFeatures) {
  Rng rng(3);
  Model m = Model::reference_architecture(4, rng, {3, 8, 8}, 8);
  for (Layer& l : m.feature_network().layers())
    if (auto* c = std::get_if<Conv3x3>(&l)) {
      c->weight = Tensor(c->weight.shape());
      c->bias = Tensor(c->bias.shape());
    }
  const Tensor z = m.forward_features(uniform(rng, {3, 3, 8, 8}, 0, 1));
  for (std::size_t i = 1; i < 3; ++i)
    for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(z.at(i, k), z.at(0, k));
}

TEST(Model, ZeroHeadPredictsClassZero) {
  Rng rng(4);
  Model m = Model::reference_architecture(4, rng, {3, 8, 8}, 8);
  for (Tensor* p : m.classifier_network().parameters()) *p = Tensor(p->shape());
  for (std::size_t c : predict(m, uniform(rng, {5, 3, 8, 8}, 0, 1))) EXPECT_EQ(c, 0u);
  const double tie[] = {1.0, 3.0, 3.0};
  EXPECT_EQ(argmax(tie), 1u);
}

TEST(Model, InputGradientOfIgnoredInputIsZero) {
  Rng rng(5);
  Model m = Model::reference_architecture(3, rng, {3, 4, 4}, 4);
  for (Layer& l : m.feature_network().layers())
    if (auto* c = std::get_if<Conv3x3>(&l)) c->weight = Tensor(c->weight.shape());
  const ForwardPass pass = m.forward(uniform(rng, {2, 3, 4, 4}, 0, 1));
  const Tensor up = uniform(rng, pass.logits().shape(), -1, 1);
  const Gradients g = m.backward(pass, nullptr, &up, true);
  for (double v : g.input->data()) EXPECT_EQ(v, 0.0);
}

TEST(Model, ReluGradientZeroForNegativeInput) {
  Network net({3}, {ReLU{}});
  std::vector<Tensor> acts;
  net.forward(Tensor({1, 3}, {-1.0, 0.0, 2.0}), &acts);
  std::vector<Tensor> none;
  const Tensor g = net.backward(acts, Tensor({1, 3}, 1.0), none, true);
  EXPECT_EQ(g, Tensor({1, 3}, {0.0, 0.0, 1.0}));
}

TEST(Model, GainBeforeNormalizeLeavesFeaturesUnchanged) {
  Rng rng(6);
  const Model m = Model::reference_architecture(4, rng, {3, 8, 8}, 8);
  std::vector<Layer> layers = m.feature_network().layers();
  layers.insert(layers.end() - 1, Gain{2.0});
  const Model scaled(Network(m.input_shape(), layers), m.classifier_network(), Role::kStudent);
  const Tensor x = uniform(rng, {4, 3, 8, 8}, 0, 1);
  EXPECT_EQ(scaled.forward_features(x), m.forward_features(x));
}

TEST(Model, BackwardErrors) {
  Rng rng(7);
  const Model m = Model::reference_architecture(3, rng, {3, 4, 4}, 4);
  const Model other = Model::reference_architecture(5, rng, {3, 4, 4}, 4);
  const Tensor up({2, 3}, 1.0);
  EXPECT_THROW(m.backward(ForwardPass{}, nullptr, &up, false), std::logic_error);
  const ForwardPass pass = other.forward(Tensor({2, 3, 4, 4}, 0.5));
  EXPECT_THROW(m.backward(pass, nullptr, &up, false), std::logic_error);
  EXPECT_THROW(m.forward_features(Tensor({2, 3, 5, 4}, 0.5)), DimensionError);
}

TEST(Sgd, NullAndPlainSteps) {
  Rng rng(8);
  Model m = Model::reference_architecture(3, rng, {3, 4, 4}, 4);
  const Model before = m;
  const ForwardPass pass = m.forward(uniform(rng, {2, 3, 4, 4}, 0, 1));
  const Tensor up = uniform(rng, pass.logits().shape(), -1, 1);
  const Gradients g = m.backward(pass, nullptr, &up, false);

  Sgd zero(0.0, 0.9, 1e-4);
  zero.step(m, g);
  EXPECT_EQ(m.parameter_hash(), before.parameter_hash());

  Sgd plain(0.1, 0.0, 0.0);
  plain.step(m, g);
  const auto after = std::as_const(m).parameters();
  const auto orig = before.parameters();
  for (std::size_t k = 0; k < after.size(); ++k)
    for (std::size_t i = 0; i < after[k]->size(); ++i) ASSERT_EQ((*after[k])[i], (*orig[k])[i] - 0.1 * g.params[k][i]);

  EXPECT_THROW(Sgd(0.1, 1.0, 0.0), std::invalid_argument);
  Gradients wrong = g;
  wrong.params.pop_back();
  EXPECT_THROW(plain.step(m, wrong), DimensionError);
}

TEST(Sgd, IdenticalRunsBitIdentical) {
  auto run = [] {
    Rng rng(9);
    Model m = Model::reference_architecture(3, rng, {3, 4, 4}, 4);
    Sgd opt(0.05, 0.9, 1e-4);
    for (int s = 0; s < 5; ++s) {
      const ForwardPass pass = m.forward(uniform(rng, {4, 3, 4, 4}, 0, 1));
      const Tensor up = uniform(rng, pass.logits().shape(), -1, 1);
      opt.step(m, m.backward(pass, nullptr, &up, false));
    }
    return m.parameter_hash();
  };
  EXPECT_EQ(run(), run());
}

TEST(Checkpoint, RoundTripAndRoles) {
  testing::TempDir dir;
  Rng rng(10);
  Model teacher = Model::reference_architecture(4, rng, {3, 8, 8}, 8);
  teacher.set_role(Role::kTeacher);
  save_ckpt(teacher, dir / "t.ckpt");

  Rng other(11);
  Model student = Model::reference_architecture(4, other, {3, 8, 8}, 8);
  student.set_role(Role::kStudent);
  EXPECT_EQ(load_ckpt(student, dir / "t.ckpt"), Role::kTeacher);
  EXPECT_EQ(student.role(), Role::kStudent);
  EXPECT_EQ(student.parameter_hash(), teacher.parameter_hash());
}

TEST(Checkpoint, ForcedErrors) {
  testing::TempDir dir;
  Rng rng(12);
  const Model m = Model::reference_architecture(4, rng, {3, 8, 8}, 8);
  save_ckpt(m, dir / "m.ckpt");
  Model wrong = Model::reference_architecture(5, rng, {3, 8, 8}, 8);
  const std::uint64_t hash = wrong.parameter_hash();
  EXPECT_THROW(load_ckpt(wrong, dir / "m.ckpt"), FormatError);
  EXPECT_EQ(wrong.parameter_hash(), hash);

  const std::string bytes = testing::read_bytes(dir / "m.ckpt");
  testing::write_bytes(dir / "short.ckpt", bytes.substr(0, bytes.size() - 8));
  Model same = m;
  EXPECT_THROW(load_ckpt(same, dir / "short.ckpt"), FormatError);
  EXPECT_EQ(same.parameter_hash(), m.parameter_hash());
}

}  // namespace
}  // namespace crda
