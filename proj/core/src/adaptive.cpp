#include "csifb/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "csifb/errors.hpp"

namespace csifb {

MeasurementRecord MeasurementRecord::make(double rho_db, double kappa, double ber, double bler, double b_max,
                                          std::string channel_tag, std::uint64_t user_seed) {
  MeasurementRecord r{rho_db, kappa, ber, bler, bler > b_max, std::move(channel_tag), user_seed};
  r.validate(b_max);
  return r;
}

void MeasurementRecord::validate(double b_max) const {
  if (!(ber >= 0.0 && ber <= 1.0) || !(bler >= 0.0 && bler <= 1.0))
    throw ValidationError("error rates must lie in [0, 1]");
  if (exceeds_bmax != (bler > b_max)) throw ValidationError("exceeds_bmax flag disagrees with the BLER");
  if (!std::isfinite(rho_db)) throw ValidationError("SNR must be finite");
}

SnrBuckets::SnrBuckets(std::vector<double> centers) : centers_(std::move(centers)) {
  if (centers_.empty()) throw ValidationError("at least one SNR bucket is required");
  if (!std::is_sorted(centers_.begin(), centers_.end()) ||
      std::adjacent_find(centers_.begin(), centers_.end()) != centers_.end())
    throw ValidationError("bucket centers must be strictly increasing");
}

SnrBuckets SnrBuckets::default_grid() { return SnrBuckets({0, 5, 10, 15, 20, 25, 30}); }

std::size_t SnrBuckets::bucket_of(double rho_db) const {
  std::size_t i = 0;
  while (i + 1 < centers_.size() && rho_db >= 0.5 * (centers_[i] + centers_[i + 1])) ++i;
  return i;
}

double SnrBuckets::low(std::size_t i) const {
  if (i >= centers_.size()) throw ValidationError("bucket index out of range");
  if (i > 0) return 0.5 * (centers_[i - 1] + centers_[i]);
  const double half = centers_.size() > 1 ? 0.5 * (centers_[1] - centers_[0]) : 0.5;
  return centers_[0] - half;
}

double SnrBuckets::high(std::size_t i) const {
  if (i >= centers_.size()) throw ValidationError("bucket index out of range");
  if (i + 1 < centers_.size()) return 0.5 * (centers_[i] + centers_[i + 1]);
  const std::size_t n = centers_.size();
  const double half = n > 1 ? 0.5 * (centers_[n - 1] - centers_[n - 2]) : 0.5;
  return centers_[n - 1] + half;
}

const DatasetEntry* AdaptiveDataset::find(const std::string& tag, std::size_t bucket, double kappa) const {
  for (const auto& e : entries)
    if (e.channel_tag == tag && e.bucket == bucket && e.kappa == kappa) return &e;
  return nullptr;
}

AdaptiveDataset build_dataset(std::span<const MeasurementRecord> records, const SnrBuckets& buckets) {
  struct Acc {
    double ber = 0.0;
    double bler = 0.0;
    std::size_t n = 0;
  };
  std::map<std::tuple<std::string, std::size_t, double>, Acc> groups;
  for (const auto& r : records) {
    auto& acc = groups[{r.channel_tag, buckets.bucket_of(r.rho_db), r.kappa}];
    acc.ber += r.ber;
    acc.bler += r.bler;
    ++acc.n;
  }
  AdaptiveDataset ds{buckets, {}};
  ds.entries.reserve(groups.size());
  for (const auto& [key, acc] : groups) {
    const auto& [tag, bucket, kappa] = key;
    const double n = static_cast<double>(acc.n);
    ds.entries.push_back({tag, bucket, kappa, acc.ber / n, acc.bler / n, acc.n});
  }
  return ds;
}

namespace {

const DatasetEntry* best_entry(const AdaptiveDataset& dataset, const std::string& tag, std::size_t bucket,
                               double b_max, bool& bucket_seen) {
  const DatasetEntry* best = nullptr;
  bucket_seen = false;
  for (const auto& e : dataset.entries) {
    if (e.channel_tag != tag || e.bucket != bucket) continue;
    bucket_seen = true;
    if (e.kappa == kNoCompression || e.mean_bler > b_max) continue;
    if (!best || e.mean_bler < best->mean_bler || (e.mean_bler == best->mean_bler && e.kappa > best->kappa))
      best = &e;
  }
  return best;
}

}  // namespace

double select_kappa(const AdaptiveDataset& dataset, const std::string& channel_tag, double rho_db, double b_max) {
  const std::size_t bucket = dataset.buckets.bucket_of(rho_db);
  bool seen = false;
  const DatasetEntry* best = best_entry(dataset, channel_tag, bucket, b_max, seen);
  if (!seen)
    throw PolicyError(fmt::format("no measurements for '{}' near {} dB; measure this bucket first", channel_tag,
                                  dataset.buckets.center(bucket)));
  return best ? best->kappa : kNoCompression;
}

double PolicyTable::lookup(double rho_db) const {
  if (rows.size() != buckets.size()) throw PolicyError("policy table is incomplete");
  return rows[buckets.bucket_of(rho_db)].kappa;
}

PolicyTable build_policy(const AdaptiveDataset& dataset, const std::string& channel_tag, double b_max) {
  PolicyTable table{channel_tag, b_max, dataset.buckets, {}};
  for (std::size_t b = 0; b < dataset.buckets.size(); ++b) {
    bool seen = false;
    const DatasetEntry* best = best_entry(dataset, channel_tag, b, b_max, seen);
    if (!seen)
      throw PolicyError(fmt::format("no measurements for '{}' near {} dB; measure this bucket first", channel_tag,
                                    dataset.buckets.center(b)));
    PolicyRow row{dataset.buckets.low(b), dataset.buckets.high(b), kNoCompression, 0.0};
    if (best) {
      row.kappa = best->kappa;
      row.measured_bler = best->mean_bler;
    } else if (const auto* base = dataset.find(channel_tag, b, kNoCompression)) {
      row.measured_bler = base->mean_bler;
    } else {
      row.measured_bler = std::nan("");
    }
    table.rows.push_back(row);
  }
  return table;
}

void write_policy_csv(const PolicyTable& table, std::ostream& out) {
  out << "bucket_low_db,bucket_high_db,kappa_or_baseline,measured_bler\n";
  for (const auto& r : table.rows) {
    const std::string kappa = r.kappa == kNoCompression ? std::string("baseline") : fmt::format("{}", r.kappa);
    out << fmt::format("{},{},{},{}\n", r.bucket_low_db, r.bucket_high_db, kappa, r.measured_bler);
  }
}

PolicyTable read_policy_csv(std::istream& in, const std::string& channel_tag, double b_max) {
  std::string line;
  if (!std::getline(in, line) || line != "bucket_low_db,bucket_high_db,kappa_or_baseline,measured_bler")
    throw SchemaError("header", "unexpected policy CSV header");
  std::vector<PolicyRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell[4];
    for (auto& c : cell)
      if (!std::getline(ss, c, ',')) throw SchemaError("row", "expected four columns: " + line);
    PolicyRow r;
    try {
      r.bucket_low_db = std::stod(cell[0]);
      r.bucket_high_db = std::stod(cell[1]);
      r.kappa = cell[2] == "baseline" ? kNoCompression : std::stod(cell[2]);
      r.measured_bler = std::stod(cell[3]);
    } catch (const std::exception&) {
      throw SchemaError("row", "non-numeric cell: " + line);
    }
    rows.push_back(r);
  }
  if (rows.empty()) throw SchemaError("rows", "policy table is empty");
  std::vector<double> centers;
  for (const auto& r : rows) centers.push_back(0.5 * (r.bucket_low_db + r.bucket_high_db));
  return PolicyTable{channel_tag, b_max, SnrBuckets(std::move(centers)), std::move(rows)};
}

std::size_t SlotSchedule::count(SlotRole role) const {
  return static_cast<std::size_t>(std::count(assignment.begin(), assignment.end(), role));
}

SlotSchedule schedule_slots(SlotPattern pattern, std::size_t frame_length, double parameter) {
  if (frame_length == 0) throw ValidationError("frame length must be at least one slot");
  SlotSchedule s{pattern, frame_length, parameter, std::vector<SlotRole>(frame_length, SlotRole::Infer)};
  if (pattern == SlotPattern::DutyCycle) {
    if (!(parameter >= 0.0 && parameter <= 1.0)) throw ValidationError("duty-cycle fraction must be in [0, 1]");
    const double exact = parameter * static_cast<double>(frame_length);
    const double nearest = std::round(exact);
    const auto n_train =
        static_cast<std::size_t>(std::abs(exact - nearest) < 1e-9 ? nearest : std::ceil(exact));
    for (std::size_t i = 0; i < n_train && i < frame_length; ++i) s.assignment[i] = SlotRole::Train;
  } else {
    if (!(parameter >= 1.0) || parameter != std::floor(parameter))
      throw ValidationError("measurement occasion must be a positive integer");
    const auto occasion = static_cast<std::size_t>(parameter);
    for (std::size_t i = 0; i < frame_length; ++i)
      if (i % occasion == 0) s.assignment[i] = SlotRole::Train;
  }
  return s;
}

bool check_invalidation(std::span<const double> inference_losses, double threshold) {
  if (inference_losses.empty()) throw ValidationError("empty inference loss window");
  double sum = 0.0;
  for (double l : inference_losses) sum += l;
  return sum / static_cast<double>(inference_losses.size()) > threshold;
}

std::vector<AdaptivePoint> run_adaptive(const PolicyTable& policy, std::span<const double> rhos_db,
                                        const std::function<ErrorCounts(double, double)>& evaluate) {
  std::vector<AdaptivePoint> out;
  out.reserve(rhos_db.size());
  for (double rho : rhos_db) {
    const double kappa = policy.lookup(rho);
    out.push_back({rho, kappa, evaluate(rho, kappa)});
  }
  return out;
}

}  // namespace csifb
