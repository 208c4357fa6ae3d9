#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "csifb/types.hpp"

namespace csifb {

// Mergeable error tallies for parallel reductions.
struct ErrorCounts {
  std::uint64_t bit_errors = 0;
  std::uint64_t bits_total = 0;
  std::uint64_t block_errors = 0;
  std::uint64_t blocks_total = 0;

  double ber() const;
  double bler() const;
  double ber_stderr() const;
  double bler_stderr() const;

  friend bool operator==(const ErrorCounts&, const ErrorCounts&) = default;
};

ErrorCounts merge(const ErrorCounts& a, const ErrorCounts& b);

// Fraction of differing bits over all transmissions; every transmission must
// have the same codeword length.
double ber(std::span<const Bits> tx, std::span<const Bits> rx);
// Fraction of transmissions whose CRC check failed.
double bler(std::span<const bool> crc_failed);
double bler(const std::vector<bool>& crc_failed);

// sqrt(p (1 - p) / n)
double rate_stderr(double p, std::uint64_t n);

// Monotonic wall-clock accounting per label. Sections may nest.
class Stopwatch {
 public:
  class Section {
   public:
    Section(Stopwatch& owner, std::string label);
    Section(const Section&) = delete;
    Section& operator=(const Section&) = delete;
    ~Section();

   private:
    Stopwatch& owner_;
    std::string label_;
    std::chrono::steady_clock::time_point start_;
  };

  Section section(std::string label) { return Section(*this, std::move(label)); }
  void add(const std::string& label, double seconds) { totals_[label] += seconds; }
  double seconds(const std::string& label) const;
  const std::map<std::string, double>& totals() const noexcept { return totals_; }

 private:
  std::map<std::string, double> totals_;
};

// Each duration divided by the largest one.
std::vector<double> normalize_durations(std::span<const double> seconds);

}  // namespace csifb
