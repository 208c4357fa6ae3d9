#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <fmt/format.h>

#include "CLI11.hpp"

#include "csifb/errors.hpp"
#include "csifb/experiment.hpp"

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream out(dir / name);
  if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
  return out;
}

void write_histories(const csifb::SweepResult& sweep, const fs::path& dir) {
  for (const auto& c : sweep.codecs)
    for (const auto& r : c.reports)
      if (!r.history.train_loss.empty()) {
        auto out = open_out(dir, fmt::format("history_{}_k{}.csv", c.profile.name, r.kappa));
        csifb::emit_history(r.history, out);
      }
}

void write_sweep_outputs(const csifb::SweepResult& sweep, const fs::path& dir) {
  {
    auto out = open_out(dir, "sweep.csv");
    csifb::write_sweep_csv(sweep, out);
  }
  {
    auto out = open_out(dir, "timing.csv");
    csifb::write_timing_csv(sweep, out);
  }
  {
    auto out = open_out(dir, "codecs.csv");
    csifb::write_codec_csv(sweep, out);
  }
  write_histories(sweep, dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Massive MIMO OFDM link simulator with learned CSI compression"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  std::string config_path;
  std::string out_dir = "out";
  std::size_t threads = 1;
  std::optional<std::uint64_t> seed;
  std::string cache_dir;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--cache", cache_dir, "directory for trained model files");
  };
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "master seed (overrides the config)");

  auto* sweep = app.add_subcommand("sweep", "BER/BLER sweep over profile, kappa, SNR and user");
  common(sweep);
  auto* adaptive = app.add_subcommand("adaptive", "build adaptive policies and compare against static kappa");
  common(adaptive);
  auto* heatmap = app.add_subcommand("heatmap", "original, latent and reconstructed CSI magnitude grids");
  common(heatmap);
  double hm_kappa = 0.5;
  double hm_rho = 10.0;
  std::size_t hm_user = 0;
  std::size_t hm_profile = 0;
  heatmap->add_option("--kappa", hm_kappa, "compression ratio")->required();
  heatmap->add_option("--rho", hm_rho, "SNR in dB")->required();
  heatmap->add_option("--user", hm_user, "user index")->required();
  heatmap->add_option("--profile", hm_profile, "profile index in the config");

  CLI11_PARSE(app, argc, argv);

  try {
    csifb::ExperimentConfig cfg = csifb::load_config(config_path);
    if (seed) cfg.master_seed = *seed;
    csifb::RunOptions opts;
    opts.threads = threads;
    if (!cache_dir.empty()) opts.cache_dir = fs::path(cache_dir);
    const fs::path dir(out_dir);

    if (sweep->parsed()) {
      const auto result = csifb::run_sweep(cfg, opts);
      write_sweep_outputs(result, dir);
      std::cout << fmt::format("wrote {} rows to {}\n", result.rows.size(), (dir / "sweep.csv").string());
    } else if (adaptive->parsed()) {
      const auto result = csifb::run_sweep(cfg, opts);
      write_sweep_outputs(result, dir);
      const auto ad = csifb::run_adaptive_experiment(cfg, result, opts);
      {
        auto out = open_out(dir, "adaptive.csv");
        csifb::write_adaptive_csv(ad, out);
      }
      for (const auto& policy : ad.policies) {
        auto out = open_out(dir, fmt::format("policy_{}.csv", policy.channel_tag));
        csifb::write_policy_csv(policy, out);
      }
      std::cout << fmt::format("wrote adaptive results for {} profiles to {}\n", ad.policies.size(), dir.string());
    } else if (heatmap->parsed()) {
      if (hm_profile >= cfg.profiles.size()) throw csifb::ValidationError("--profile is out of range");
      const auto profile = csifb::load_cdl_profile(cfg.profiles[hm_profile]);
      const auto codecs = csifb::train_codecs(cfg, profile, hm_profile, opts);
      const auto hm = csifb::emit_csi_heatmap(cfg, codecs, hm_kappa, hm_rho, hm_user);
      const auto stem = fmt::format("heatmap_{}_k{}_rho{}_u{}", profile.name, hm_kappa, hm_rho, hm_user);
      for (auto [suffix, grid] : {std::pair{"original", &hm.original}, std::pair{"latent", &hm.latent},
                                  std::pair{"reconstructed", &hm.reconstructed}}) {
        auto out = open_out(dir, fmt::format("{}_{}.csv", stem, suffix));
        csifb::write_grid_csv(*grid, out);
      }
      std::cout << fmt::format("pearson(original, reconstructed) = {:.4f}\n", hm.pearson);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
