// Serial reference vs OpenMP kernels on the shapes the trainer produces:
// features [D, M] with D = 8 and M up to 32 x 32 pixels.
#include <benchmark/benchmark.h>

#include "derprop/kernels.hpp"
#include "derprop/rng.hpp"

namespace {

using derprop::Tensor;

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Tensor t = Tensor::matrix(rows, cols);
  derprop::CounterRng rng(seed);
  for (double& v : t.values()) v = rng.normal();
  return t;
}

constexpr std::size_t kDim = 8;

template <Tensor (*Gram)(const Tensor&)>
void BM_Gram(benchmark::State& state) {
  const Tensor v = random_matrix(kDim, static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(Gram(v));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

// Rectified logits L K with C = 4 classes.
template <Tensor (*Matmul)(const Tensor&, const Tensor&)>
void BM_Propagate(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const Tensor l = random_matrix(4, m, 2), k = random_matrix(m, m, 3);
  for (auto _ : state) benchmark::DoNotOptimize(Matmul(l, k));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

// V H in the similarity backward pass.
template <Tensor (*Matmul)(const Tensor&, const Tensor&)>
void BM_FeatureBackward(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const Tensor v = random_matrix(kDim, m, 4), h = random_matrix(m, m, 5);
  for (auto _ : state) benchmark::DoNotOptimize(Matmul(v, h));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

template <double (*L1)(const Tensor&, const Tensor&, Tensor&)>
void BM_L1WithSign(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_matrix(m, m, 6), b = random_matrix(m, m, 7);
  Tensor sign;
  for (auto _ : state) benchmark::DoNotOptimize(L1(a, b, sign));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

#define DERPROP_PAIR(name, fn)                                                                       \
  BENCHMARK_TEMPLATE(name, derprop::kernels::serial::fn)->Name(#name "/serial")->RangeMultiplier(4)->Range(64, 1024); \
  BENCHMARK_TEMPLATE(name, derprop::kernels::fn)->Name(#name "/omp")->RangeMultiplier(4)->Range(64, 1024)

DERPROP_PAIR(BM_Gram, gram);
DERPROP_PAIR(BM_Propagate, matmul);
DERPROP_PAIR(BM_FeatureBackward, matmul);
DERPROP_PAIR(BM_L1WithSign, l1_distance_with_sign);

}  // namespace

BENCHMARK_MAIN();
