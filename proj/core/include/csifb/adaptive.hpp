#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "csifb/metrics.hpp"

namespace csifb {

// kappa value standing for "send the estimate uncompressed".
inline constexpr double kNoCompression = 0.0;

struct MeasurementRecord {
  double rho_db = 0.0;
  double kappa = 0.0;
  double ber = 0.0;
  double bler = 0.0;
  bool exceeds_bmax = false;
  std::string channel_tag;
  std::uint64_t user_seed = 0;

  // Sets exceeds_bmax from bler.
  static MeasurementRecord make(double rho_db, double kappa, double ber, double bler, double b_max,
                                std::string channel_tag, std::uint64_t user_seed);
  void validate(double b_max) const;
};

// SNR buckets around grid centers with nearest-center assignment. Bucket i
// spans [midpoint(i-1, i), midpoint(i, i+1)); the outer buckets extend by half
// a grid step.
class SnrBuckets {
 public:
  explicit SnrBuckets(std::vector<double> centers);
  static SnrBuckets default_grid();  // 0, 5, ..., 30 dB

  std::size_t size() const noexcept { return centers_.size(); }
  std::size_t bucket_of(double rho_db) const;
  double center(std::size_t i) const { return centers_.at(i); }
  double low(std::size_t i) const;
  double high(std::size_t i) const;

 private:
  std::vector<double> centers_;
};

struct DatasetEntry {
  std::string channel_tag;
  std::size_t bucket = 0;
  double kappa = 0.0;
  double mean_ber = 0.0;
  double mean_bler = 0.0;
  std::size_t trials = 0;
};

// Records grouped by (channel_tag, bucket, kappa), sorted in that order.
struct AdaptiveDataset {
  SnrBuckets buckets = SnrBuckets::default_grid();
  std::vector<DatasetEntry> entries;

  const DatasetEntry* find(const std::string& tag, std::size_t bucket, double kappa) const;
};

AdaptiveDataset build_dataset(std::span<const MeasurementRecord> records,
                              const SnrBuckets& buckets = SnrBuckets::default_grid());

// Constrained argmin of BLER over the compressed ratios in the bucket of
// rho_db; ties go to the larger kappa; kNoCompression when nothing meets b_max.
// Baseline entries (kappa = 0) are not candidates.
double select_kappa(const AdaptiveDataset& dataset, const std::string& channel_tag, double rho_db,
                    double b_max = 0.1);

struct PolicyRow {
  double bucket_low_db = 0.0;
  double bucket_high_db = 0.0;
  double kappa = kNoCompression;
  double measured_bler = 0.0;
};

struct PolicyTable {
  std::string channel_tag;
  double b_max = 0.1;
  SnrBuckets buckets = SnrBuckets::default_grid();
  std::vector<PolicyRow> rows;  // one per bucket

  double lookup(double rho_db) const;
};

PolicyTable build_policy(const AdaptiveDataset& dataset, const std::string& channel_tag, double b_max = 0.1);

// CSV columns: bucket_low_db,bucket_high_db,kappa_or_baseline,measured_bler
void write_policy_csv(const PolicyTable& table, std::ostream& out);
PolicyTable read_policy_csv(std::istream& in, const std::string& channel_tag = {}, double b_max = 0.1);

enum class SlotPattern { DutyCycle, Staggered };
enum class SlotRole : std::uint8_t { Train, Infer };

struct SlotSchedule {
  SlotPattern pattern = SlotPattern::DutyCycle;
  std::size_t frame_length = 0;
  double parameter = 0.0;  // train fraction or measurement occasion
  std::vector<SlotRole> assignment;

  std::size_t count(SlotRole role) const;
};

// duty cycle: the first ceil(fraction * frame) slots train, the rest infer.
// staggered: slot i trains iff i mod occasion == 0.
SlotSchedule schedule_slots(SlotPattern pattern, std::size_t frame_length, double parameter);

// Retrain when the mean inference loss over the window strictly exceeds the threshold.
bool check_invalidation(std::span<const double> inference_losses, double threshold);
inline double default_invalidation_threshold(double final_train_loss) { return 2.0 * final_train_loss; }

struct AdaptivePoint {
  double rho_db = 0.0;
  double kappa = kNoCompression;
  ErrorCounts counts;
};

// Evaluates the link at each rho with the kappa the policy selects. The
// evaluator receives (rho_db, kappa) with kappa = kNoCompression for the
// uncompressed estimate.
std::vector<AdaptivePoint> run_adaptive(const PolicyTable& policy, std::span<const double> rhos_db,
                                        const std::function<ErrorCounts(double, double)>& evaluate);

}  // namespace csifb
