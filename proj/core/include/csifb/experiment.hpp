#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "csifb/adaptive.hpp"
#include "csifb/chanmodel.hpp"
#include "csifb/csi_codec.hpp"
#include "csifb/metrics.hpp"
#include "csifb/phy_link.hpp"

namespace csifb {

struct TrainSettings {
  std::size_t epochs = 64;
  std::size_t batch = 128;
  double lr = 1e-4;
  std::size_t samples = 1024;  // slots in the training frame
  double val_fraction = 0.2;
};

struct ExperimentConfig {
  LinkConfig link;  // n_t follows the URA, snr_db is swept
  std::vector<std::filesystem::path> profiles;
  std::size_t ura_rows = 4;
  std::size_t ura_cols = 4;
  std::vector<double> kappas{0.1, 0.5, 0.7};
  std::vector<double> rhos_db{0, 5, 10, 15, 20, 25, 30};
  std::size_t n_users = 10;
  std::size_t payload_bits = 200000;
  std::size_t n_blocks = 4;  // coherence blocks per (user, rho) point
  TrainSettings train;
  double b_max = 0.1;
  std::uint64_t master_seed = 1;
  SlotPattern pattern = SlotPattern::DutyCycle;
  double pattern_parameter = 0.75;
  double static_kappa = 0.5;
  std::uint8_t bits_per_element = 32;
  // Adaptive evaluation users are master_seed + eval_user_offset + v.
  std::uint64_t eval_user_offset = 1000;

  void validate() const;
  ChannelLayout layout() const;
  CodecDims codec_dims() const;
  LinkConfig link_at(double rho_db) const;
  std::string ura_label() const;
  std::uint64_t user_seed(std::size_t user) const { return master_seed + user; }
};

// JSON config; relative profile paths resolve against base_dir.
ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

struct RunOptions {
  std::size_t threads = 1;
  std::optional<std::filesystem::path> cache_dir;
};

struct CodecReport {
  double kappa = 0.0;
  TrainHistory history;
  std::vector<double> inference_losses;  // one per INFER slot
  bool invalidated = false;
  bool from_cache = false;
  double codec_seconds = 0.0;  // train + encode/decode of the inference slots
};

struct ProfileCodecs {
  CdlProfile profile;
  std::size_t profile_index = 0;
  CodecBank bank;  // index i holds kappas[i]
  std::vector<CodecReport> reports;
};

// Builds the training frame from the slot schedule and trains one model per kappa.
ProfileCodecs train_codecs(const ExperimentConfig& cfg, const CdlProfile& profile, std::size_t profile_index,
                           const RunOptions& opts = {});

struct PointResult {
  ErrorCounts counts;
  double recon_mse = 0.0;
  double eval_seconds = 0.0;
};

// Runs every requested kappa (0 = uncompressed estimate) on the same channel,
// pilot-noise and data-noise realizations for one (profile, rho, user seed).
std::vector<PointResult> evaluate_point(const ExperimentConfig& cfg, const ProfileCodecs& codecs, double rho_db,
                                        std::uint64_t user_seed, const std::vector<double>& kappas);

struct SweepRow {
  std::string profile;
  std::string ura;
  double kappa = 0.0;
  double rho_db = 0.0;
  std::uint64_t user_seed = 0;
  ErrorCounts counts;
  double recon_mse = 0.0;
  double train_seconds = 0.0;
  double eval_seconds = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<ProfileCodecs> codecs;
};

// For each (profile, kappa incl. 0, rho, user): one row. Row order is fixed.
SweepResult run_sweep(const ExperimentConfig& cfg, const RunOptions& opts = {});

// Deterministic columns only; wall-clock columns go to the timing CSV.
void write_sweep_csv(const SweepResult& result, std::ostream& out);
void write_timing_csv(const SweepResult& result, std::ostream& out);
void write_codec_csv(const SweepResult& result, std::ostream& out);

std::vector<MeasurementRecord> measurement_records(const SweepResult& sweep, double b_max);

struct AdaptiveRow {
  std::string profile;
  double rho_db = 0.0;
  std::string scheme;  // adaptive | static | no_compression
  double kappa = 0.0;
  ErrorCounts counts;
};

struct AdaptiveResult {
  std::vector<PolicyTable> policies;  // one per profile
  std::vector<AdaptiveRow> rows;
};

// Builds per-profile policies from the sweep, then evaluates adaptive, static
// and uncompressed traces on fresh, paired user realizations.
AdaptiveResult run_adaptive_experiment(const ExperimentConfig& cfg, const SweepResult& sweep,
                                       const RunOptions& opts = {});
AdaptiveResult run_adaptive_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});
void write_adaptive_csv(const AdaptiveResult& result, std::ostream& out);

struct Grid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major
};

struct Heatmap {
  Grid original;       // |H_hat[k, 0, t]|, N_sc x N_t
  Grid latent;         // |z| reshaped to (2 N_r N_t) x ceil((1 - kappa) N_sc)
  Grid reconstructed;  // N_sc x N_t
  double pearson = 0.0;
};

Heatmap emit_csi_heatmap(const ExperimentConfig& cfg, const ProfileCodecs& codecs, double kappa, double rho_db,
                         std::size_t user);
void write_grid_csv(const Grid& grid, std::ostream& out);

double pearson(std::span<const double> a, std::span<const double> b);

// epoch,train_loss,val_loss
void emit_history(const TrainHistory& history, std::ostream& out);
bool history_trend_decreasing(const TrainHistory& history);

}  // namespace csifb
