#include <benchmark/benchmark.h>

#include "csifb/chanmodel.hpp"
#include "csifb/phy_link.hpp"
#include "csifb/rng.hpp"

using namespace csifb;

namespace {

CdlProfile two_clusters() {
  CdlProfile p;
  p.name = "bench";
  p.clusters = {{0.0, 0.7, 0.3, 1.2, 0.5, 1.4}, {300e-9, 0.3, -0.6, 1.5, 2.0, 1.1}};
  p.normalize_powers();
  return p;
}

void BM_SynthesizeBlock(benchmark::State& state) {
  const auto p = two_clusters();
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(synthesize_block(p, ChannelLayout{}, ++seed, 0));
}
BENCHMARK(BM_SynthesizeBlock);

void BM_SvdPrecoder(benchmark::State& state) {
  const auto h = synthesize_csi(two_clusters(), ChannelLayout{}, 1);
  LinkConfig cfg;
  cfg.snr_db = 20.0;
  const double nv = noise_var_from_snr(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(svd_precoder(h, nv, cfg.total_power / cfg.n_sc));
}
BENCHMARK(BM_SvdPrecoder)->Unit(benchmark::kMillisecond);

void BM_LinkOnce(benchmark::State& state) {
  const auto h = synthesize_csi(two_clusters(), ChannelLayout{}, 1);
  LinkConfig cfg;
  cfg.snr_db = 20.0;
  BitBlock payload;
  payload.codeword_len = cfg.codeword_payload_bits();
  payload.bits = random_payload(50000, 2);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_link_once(payload, h, h, cfg, ++seed));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(payload.bits.size()));
}
BENCHMARK(BM_LinkOnce)->Unit(benchmark::kMillisecond);

}  // namespace
