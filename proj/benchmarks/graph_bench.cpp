#include <benchmark/benchmark.h>

#include <random>

#include "ctxnmt/adam.hpp"
#include "ctxnmt/graph.hpp"

namespace {

ctxnmt::Tensor RandomTensor(std::vector<int> shape, std::mt19937_64& rng) {
  ctxnmt::Tensor t(std::move(shape), 0.0, true);
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  for (double& v : t.values) v = dist(rng);
  return t;
}

void BM_MatMulForward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  ctxnmt::Tensor A = RandomTensor({n, n}, rng);
  ctxnmt::Tensor B = RandomTensor({n, n}, rng);
  for (auto _ : state) {
    ctxnmt::Graph g;
    auto c = g.matmul(g.param(A), g.param(B));
    benchmark::DoNotOptimize(g.value(c).values.data());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}
BENCHMARK(BM_MatMulForward)->Arg(32)->Arg(64)->Arg(128);

void BM_ForwardBackwardChain(benchmark::State& state) {
  // One tanh-affine layer applied along a synthetic "sequence", then a
  // softmax NLL: roughly the per-step shape of the recurrent models.
  const int steps = static_cast<int>(state.range(0));
  const int width = 64;
  std::mt19937_64 rng(2);
  ctxnmt::Tensor W = RandomTensor({width, width}, rng);
  ctxnmt::Tensor x = RandomTensor({width}, rng);
  for (auto _ : state) {
    ctxnmt::zero_grads({&W, &x});
    ctxnmt::Graph g;
    auto wn = g.param(W);
    auto h = g.param(x);
    for (int t = 0; t < steps; ++t) h = g.tanh(g.matmul(h, wn));
    auto loss = g.nll(h, 3);
    g.backward(loss);
    benchmark::DoNotOptimize(g.scalar_value(loss));
  }
  state.SetItemsProcessed(state.iterations() * steps);
}
BENCHMARK(BM_ForwardBackwardChain)->Arg(8)->Arg(32);

void BM_AdamStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(3);
  ctxnmt::Tensor w = RandomTensor({n}, rng);
  w.ensure_grad();
  for (std::size_t i = 0; i < w.numel(); ++i) (*w.grad)[i] = 1e-3;
  ctxnmt::AdamState st;
  for (auto _ : state) {
    ctxnmt::adam_step({&w}, st);
    benchmark::DoNotOptimize(w.values.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_AdamStep)->Arg(1 << 10)->Arg(1 << 16);

}  // namespace

BENCHMARK_MAIN();
