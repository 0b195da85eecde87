#include <benchmark/benchmark.h>

#include "crda/corruptions.hpp"
#include "crda/ddg.hpp"
#include "crda/losses.hpp"
#include "crda/nn.hpp"
#include "crda/synthetic.hpp"

namespace crda {
namespace {

void BM_ModelForward(benchmark::State& state) {
  Rng rng(1);
  const Model m = Model::reference_architecture(10, rng, {3, 32, 32}, 64);
  const Tensor x = uniform(rng, {static_cast<std::size_t>(state.range(0)), 3, 32, 32}, 0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(m.forward_logits(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ModelForward)->Arg(1)->Arg(32);

void BM_ModelForwardBackward(benchmark::State& state) {
  Rng rng(2);
  Model m = Model::reference_architecture(10, rng, {3, 32, 32}, 64);
  const Tensor x = uniform(rng, {32, 3, 32, 32}, 0.0, 1.0);
  std::vector<std::uint32_t> y(32);
  for (auto& l : y) l = static_cast<std::uint32_t>(rng.below(10));
  for (auto _ : state) {
    const ForwardPass p = m.forward(x, true);
    const LossGrad l = cls_loss(p.logits(), y);
    benchmark::DoNotOptimize(m.backward(p, nullptr, &l.grad, false));
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_ModelForwardBackward);

void BM_Corruption(benchmark::State& state) {
  const auto kind = kAllCorruptions[static_cast<std::size_t>(state.range(0))];
  Rng rng(3);
  const Tensor img = uniform(rng, {3, 32, 32}, 0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(apply_corruption(kind, Severity(5), img, rng));
  state.SetLabel(std::string(corruption_name(kind)));
}
BENCHMARK(BM_Corruption)->DenseRange(0, kCorruptionCount - 1);

void BM_Contrastive(benchmark::State& state) {
  Rng rng(4);
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor zs = uniform(rng, {n, 64}, -1.0, 1.0), zt = uniform(rng, {n, 64}, -1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(contrastive_loss(zs, zt, {0.2}));
}
BENCHMARK(BM_Contrastive)->Arg(8)->Arg(32)->Arg(128);

void BM_Mmd(benchmark::State& state) {
  Rng rng(5);
  const Tensor zs = uniform(rng, {32, 64}, -1.0, 1.0), zt = uniform(rng, {32, 64}, -1.0, 1.0);
  const std::vector<double> mult = {0.25, 1.0, 4.0};
  const auto gammas = median_heuristic_gammas(zs, zt, mult);
  for (auto _ : state) benchmark::DoNotOptimize(mmd2(zs, zt, gammas));
}
BENCHMARK(BM_Mmd);

void BM_DdgGenerate(benchmark::State& state) {
  Rng rng(6);
  const Model m = Model::reference_architecture(10, rng, {3, 32, 32}, 64);
  const Tensor xs = uniform(rng, {32, 3, 32, 32}, 0.0, 1.0), xt = uniform(rng, {32, 3, 32, 32}, 0.0, 1.0);
  const Tensor zs = m.forward_features(xs);
  DdgConfig cfg;
  cfg.steps = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(generate(m, {}, xt, zs, cfg, rng));
}
BENCHMARK(BM_DdgGenerate)->Arg(1)->Arg(2)->Arg(4);

}  // namespace
}  // namespace crda

BENCHMARK_MAIN();
