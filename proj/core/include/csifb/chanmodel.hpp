#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "csifb/types.hpp"

namespace csifb {

struct Cluster {
  double delay_s = 0.0;
  double power = 1.0;  // linear, normalized across the profile
  double aod_azimuth = 0.0;
  double aod_zenith = 0.0;
  double aoa_azimuth = 0.0;
  double aoa_zenith = 0.0;
};

// Clustered delay line table: one ray per cluster.
struct CdlProfile {
  std::string name;
  bool los = false;
  std::vector<Cluster> clusters;

  // Throws ValidationError unless powers are positive, delays finite and
  // non-negative, and at least one cluster is present.
  void validate() const;
  // Rescales powers to unit sum.
  void normalize_powers();
};

// Parses the JSON profile schema. Powers in dB become linear, degrees become
// radians, and powers are normalized to sum to one.
CdlProfile parse_cdl_profile(std::string_view json_text);
CdlProfile load_cdl_profile(const std::filesystem::path& path);

// Keeps the first `count` clusters and renormalizes.
CdlProfile truncate_clusters(const CdlProfile& profile, std::size_t count);

// Half-wavelength uniform rectangular array. A linear array is rows x 1.
class UraGeometry {
 public:
  static constexpr double kSpacingWavelengths = 0.5;

  UraGeometry(std::size_t rows, std::size_t cols);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t elements() const noexcept { return rows_ * cols_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
};

// Element (p, q), stored row-major at p * cols + q, has phase
// 2*pi*0.5*(p*u + q*v), u = sin(zen)cos(az), v = sin(zen)sin(az).
CVector steering_vector(const UraGeometry& geom, double azimuth, double zenith);

// Frequency-domain CSI indexed (subcarrier, rx, tx). Storage order is
// subcarrier-major, then rx, then tx, which is also the vectorization order.
class ChannelTensor {
 public:
  ChannelTensor() = default;
  ChannelTensor(std::size_t n_sc, std::size_t n_r, std::size_t n_t);

  std::size_t n_sc() const noexcept { return n_sc_; }
  std::size_t n_r() const noexcept { return n_r_; }
  std::size_t n_t() const noexcept { return n_t_; }
  std::size_t size() const noexcept { return data_.size(); }

  cplx& operator()(std::size_t k, std::size_t r, std::size_t t) { return data_[index(k, r, t)]; }
  const cplx& operator()(std::size_t k, std::size_t r, std::size_t t) const { return data_[index(k, r, t)]; }

  std::size_t index(std::size_t k, std::size_t r, std::size_t t) const noexcept {
    return (k * n_r_ + r) * n_t_ + t;
  }

  // n_r x n_t view of subcarrier k.
  Eigen::Map<CRowMatrix> subcarrier(std::size_t k);
  Eigen::Map<const CRowMatrix> subcarrier(std::size_t k) const;

  std::vector<cplx>& data() noexcept { return data_; }
  const std::vector<cplx>& data() const noexcept { return data_; }

  bool all_finite() const noexcept;
  double squared_norm() const noexcept;

  friend bool operator==(const ChannelTensor&, const ChannelTensor&) = default;

 private:
  std::size_t n_sc_ = 0;
  std::size_t n_r_ = 0;
  std::size_t n_t_ = 0;
  std::vector<cplx> data_;
};

struct ChannelLayout {
  UraGeometry tx{4, 4};
  std::size_t n_r = 4;
  std::size_t n_sc = 128;
  double delta_f = 15e3;
};

// H[k] = sum_c sqrt(p_c) e^{j phi_c} a_rx(aoa_c) a_tx(aod_c)^H e^{-j 2 pi tau_c k df}
// with one uniform phase per cluster, so E|H[k, r, t]|^2 = 1. The receiver is a
// half-wavelength ULA.
// Equivalent to block 0 of draw_block_fading with the same seed.
ChannelTensor synthesize_csi(const CdlProfile& profile, const ChannelLayout& layout, std::uint64_t seed);

// Realization of coherence block `block`; phases depend only on (seed, block).
ChannelTensor synthesize_block(const CdlProfile& profile, const ChannelLayout& layout, std::uint64_t seed,
                               std::size_t block);

std::vector<ChannelTensor> draw_block_fading(const CdlProfile& profile, const ChannelLayout& layout,
                                             std::uint64_t seed, std::size_t n_blocks);

}  // namespace csifb
