#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csifb/chanmodel.hpp"
#include "csifb/types.hpp"

namespace csifb {

// ---------------------------------------------------------------------------
// CRC

// Generator polynomial given MSB first, e.g. "1010011" for x^6 + x^4 + x + 1.
class CrcPolynomial {
 public:
  explicit CrcPolynomial(std::string_view bits);

  std::size_t degree() const noexcept { return coeffs_.size() - 1; }
  const Bits& coefficients() const noexcept { return coeffs_; }
  std::string to_string() const;

 private:
  Bits coeffs_;
};

// The generator c(x) = x^6 + x^4 + x + 1 used for block error detection.
inline const char* const kDefaultCrcPoly = "1010011";

Bits crc_remainder(std::span<const std::uint8_t> message, const CrcPolynomial& poly);
// message || remainder(message * x^deg mod poly)
Bits crc_append(std::span<const std::uint8_t> message, const CrcPolynomial& poly);
bool crc_check(std::span<const std::uint8_t> received, const CrcPolynomial& poly);

// ---------------------------------------------------------------------------
// 16-QAM
//
// Gray map per axis, two bits each (first pair -> I, second pair -> Q):
//   00 -> -3,  01 -> -1,  11 -> +1,  10 -> +3,  all scaled by 1/sqrt(10).
// So 0000 -> (-3 - 3j)/sqrt(10) and the average symbol energy is 1.

inline constexpr std::size_t kBitsPerSymbol = 4;

cplx qam16_point(unsigned label);
std::vector<cplx> qam16_modulate(std::span<const std::uint8_t> bits);
// Nearest constellation point; ties go to the smaller Gray label.
unsigned qam16_decide(cplx z);
Bits qam16_detect(std::span<const cplx> symbols);

// ---------------------------------------------------------------------------
// Configuration

enum class PilotDesign { RandomQpsk, Orthogonal };

struct LinkConfig {
  std::size_t n_t = 16;
  std::size_t n_r = 4;
  std::size_t n_sc = 128;
  std::size_t n_pilot = 64;
  double delta_f = 15e3;
  std::string crc_poly = kDefaultCrcPoly;
  double snr_db = 30.0;
  double total_power = 1.0;
  PilotDesign pilots = PilotDesign::RandomQpsk;

  std::size_t n_streams() const noexcept { return n_t < n_r ? n_t : n_r; }
  // Payload bits per codeword: one stream over one OFDM symbol minus the CRC.
  std::size_t codeword_payload_bits() const;
  void validate() const;
};

// sigma_n^2 = P_x / (N_sc N_t rho)
double noise_var_from_snr(const LinkConfig& cfg);
// P_x / (N_t N_sc)
double reference_symbol_power(const LinkConfig& cfg);

// ---------------------------------------------------------------------------
// Channel estimation

// Unit-modulus pilot matrix (n_pilot x n_t) with full column rank.
CMatrix generate_pilots(std::size_t n_pilot, std::size_t n_t, std::uint64_t seed,
                        PilotDesign design = PilotDesign::RandomQpsk);

// Pilots and observations in the orientation Y_k = X H_k^T + N_k.
struct PilotBlock {
  CMatrix x_pilot;                 // n_pilot x n_t
  std::vector<CMatrix> y_pilot;    // per subcarrier, n_pilot x n_r
};

// Least squares: H_k^T = (X^H X)^{-1} X^H Y_k.
ChannelTensor ls_estimate(const PilotBlock& pb);

// Transmits scaled pilots through h_true with AWGN at the configured SNR and
// returns the observation block. Pilot REs carry the reference symbol power.
PilotBlock transmit_pilots(const ChannelTensor& h_true, const CMatrix& pilots, const LinkConfig& cfg,
                           std::uint64_t seed);

// ---------------------------------------------------------------------------
// Precoding, combining, equalization

// p_i = max(0, mu - noise_var / g_i^2) with sum p_i = budget.
std::vector<double> waterfill(std::span<const double> gains, double noise_var, double budget);

struct SubcarrierPrecoder {
  CMatrix f;                   // n_t x n_s, columns scaled by sqrt(power)
  CMatrix g;                   // n_r x n_s, orthonormal columns
  std::vector<double> sigma;   // singular values, descending
  std::vector<double> power;   // waterfilling allocation
};

struct PrecodeSet {
  std::vector<SubcarrierPrecoder> subcarriers;
};

// Per-subcarrier SVD of the (reconstructed) channel. Each right singular
// vector is rotated so its largest-magnitude entry is real positive; the left
// vectors follow as u_i = H v_i / sigma_i.
PrecodeSet svd_precoder(const ChannelTensor& h, double noise_var, double budget_per_subcarrier);

// W = (H^H H + noise_var I)^{-1} H^H
CMatrix mmse_equalizer(const CMatrix& h_eff, double noise_var);

// ---------------------------------------------------------------------------
// End-to-end

struct BitBlock {
  Bits bits;
  std::size_t codeword_len = 0;  // payload bits per codeword

  std::size_t codeword_count() const noexcept {
    return codeword_len == 0 ? 0 : (bits.size() + codeword_len - 1) / codeword_len;
  }
};

struct LinkResult {
  // Received payload bits, codeword-aligned and zero-padded like the input.
  Bits rx_bits;
  // Transmitted payload bits after padding, same length as rx_bits.
  Bits tx_bits;
  // true when the CRC check of codeword n fails.
  std::vector<bool> crc_failed;
  std::size_t bit_errors = 0;
};

Bits random_payload(std::size_t n_bits, std::uint64_t seed);

// Propagates through h_true with precoder, combiner and equalizer derived from
// h_recon. Codeword n rides stream (n mod N_s) of OFDM symbol (n / N_s).
LinkResult run_link_once(const BitBlock& payload, const ChannelTensor& h_true, const ChannelTensor& h_recon,
                         const LinkConfig& cfg, std::uint64_t seed);

}  // namespace csifb
