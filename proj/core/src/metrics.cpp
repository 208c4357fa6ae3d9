#include "csifb/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "csifb/errors.hpp"

namespace csifb {

double ErrorCounts::ber() const {
  return bits_total == 0 ? 0.0 : static_cast<double>(bit_errors) / static_cast<double>(bits_total);
}

double ErrorCounts::bler() const {
  return blocks_total == 0 ? 0.0 : static_cast<double>(block_errors) / static_cast<double>(blocks_total);
}

double ErrorCounts::ber_stderr() const { return rate_stderr(ber(), bits_total); }
double ErrorCounts::bler_stderr() const { return rate_stderr(bler(), blocks_total); }

ErrorCounts merge(const ErrorCounts& a, const ErrorCounts& b) {
  return {a.bit_errors + b.bit_errors, a.bits_total + b.bits_total, a.block_errors + b.block_errors,
          a.blocks_total + b.blocks_total};
}

double ber(std::span<const Bits> tx, std::span<const Bits> rx) {
  if (tx.empty()) throw ValidationError("BER needs at least one transmission");
  if (tx.size() != rx.size()) throw ValidationError("transmission counts differ");
  const std::size_t len = tx.front().size();
  std::uint64_t errors = 0;
  for (std::size_t n = 0; n < tx.size(); ++n) {
    if (tx[n].size() != len || rx[n].size() != len) throw ValidationError("codeword lengths differ");
    for (std::size_t i = 0; i < len; ++i) errors += tx[n][i] != rx[n][i];
  }
  return static_cast<double>(errors) / static_cast<double>(tx.size() * len);
}

double bler(std::span<const bool> crc_failed) {
  if (crc_failed.empty()) throw ValidationError("BLER needs at least one transmission");
  const auto fails = std::count(crc_failed.begin(), crc_failed.end(), true);
  return static_cast<double>(fails) / static_cast<double>(crc_failed.size());
}

double bler(const std::vector<bool>& crc_failed) {
  if (crc_failed.empty()) throw ValidationError("BLER needs at least one transmission");
  const auto fails = std::count(crc_failed.begin(), crc_failed.end(), true);
  return static_cast<double>(fails) / static_cast<double>(crc_failed.size());
}

double rate_stderr(double p, std::uint64_t n) {
  if (n == 0) return 0.0;
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n));
}

Stopwatch::Section::Section(Stopwatch& owner, std::string label)
    : owner_(owner), label_(std::move(label)), start_(std::chrono::steady_clock::now()) {}

Stopwatch::Section::~Section() {
  const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start_;
  owner_.add(label_, d.count());
}

double Stopwatch::seconds(const std::string& label) const {
  auto it = totals_.find(label);
  return it == totals_.end() ? 0.0 : it->second;
}

std::vector<double> normalize_durations(std::span<const double> seconds) {
  std::vector<double> out(seconds.begin(), seconds.end());
  if (out.empty()) return out;
  const double peak = *std::max_element(out.begin(), out.end());
  if (!(peak > 0.0)) throw ValidationError("cannot normalize non-positive durations");
  for (double& v : out) v /= peak;
  return out;
}

}  // namespace csifb
