#include <benchmark/benchmark.h>

#include "csifb/csi_codec.hpp"
#include "csifb/rng.hpp"

using namespace csifb;

namespace {

const CodecDims kDesk{128, 4, 16};

RMatrix random_batch(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  RMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (auto& v : m.reshaped()) v = uniform01(rng);
  return m;
}

double kappa_arg(const benchmark::State& state) { return static_cast<double>(state.range(0)) / 10.0; }

void BM_Forward(benchmark::State& state) {
  const auto model = ae_init(kappa_arg(state), kDesk, 1);
  const RMatrix batch = random_batch(model.input_dim(), 128, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ae_decode(model, ae_encode(model, batch)));
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(5)->Arg(7)->Unit(benchmark::kMillisecond);

void BM_Backprop(benchmark::State& state) {
  const auto model = ae_init(kappa_arg(state), kDesk, 1);
  const RMatrix batch = random_batch(model.input_dim(), 128, 2);
  for (auto _ : state) benchmark::DoNotOptimize(backprop(model, batch));
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_Backprop)->Arg(1)->Arg(5)->Arg(7)->Unit(benchmark::kMillisecond);

void BM_WireRoundTrip(benchmark::State& state) {
  LatentCsi l;
  l.dims = kDesk;
  Rng rng(3);
  for (std::size_t i = 0; i < latent_dim(0.5, kDesk); ++i) l.values.push_back(static_cast<float>(standard_normal(rng)));
  for (auto _ : state) benchmark::DoNotOptimize(deserialize(serialize(l)));
}
BENCHMARK(BM_WireRoundTrip);

}  // namespace
