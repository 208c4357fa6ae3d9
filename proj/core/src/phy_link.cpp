#include "csifb/phy_link.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "csifb/errors.hpp"
#include "csifb/rng.hpp"

namespace csifb {

// ---------------------------------------------------------------------------
// CRC

CrcPolynomial::CrcPolynomial(std::string_view bits) {
  for (char c : bits) {
    if (c != '0' && c != '1') throw ValidationError("CRC polynomial must be a bit string");
    coeffs_.push_back(static_cast<std::uint8_t>(c - '0'));
  }
  if (coeffs_.size() < 2) throw ValidationError("CRC polynomial must have degree >= 1");
  if (coeffs_.front() != 1) throw ValidationError("CRC polynomial leading coefficient must be 1");
  if (coeffs_.size() > 64) throw ValidationError("CRC polynomial degree above 63 is not supported");
}

std::string CrcPolynomial::to_string() const {
  std::string s;
  for (auto b : coeffs_) s.push_back(static_cast<char>('0' + b));
  return s;
}

namespace {

// Polynomial remainder of the bit sequence, processed MSB first.
class CrcRegister {
 public:
  explicit CrcRegister(const CrcPolynomial& poly) : deg_(poly.degree()) {
    mask_ = deg_ == 64 ? ~0ULL : ((1ULL << deg_) - 1);
    for (std::size_t i = 1; i < poly.coefficients().size(); ++i)
      low_ = (low_ << 1) | poly.coefficients()[i];
  }

  void push(std::uint8_t bit) {
    const bool top = (reg_ >> (deg_ - 1)) & 1ULL;
    reg_ = ((reg_ << 1) | (bit & 1U)) & mask_;
    if (top) reg_ ^= low_;
  }

  std::uint64_t value() const { return reg_; }

 private:
  std::size_t deg_;
  std::uint64_t mask_ = 0;
  std::uint64_t low_ = 0;
  std::uint64_t reg_ = 0;
};

}  // namespace

Bits crc_remainder(std::span<const std::uint8_t> message, const CrcPolynomial& poly) {
  if (message.empty()) throw ValidationError("CRC of an empty message");
  CrcRegister reg(poly);
  for (auto b : message) reg.push(b);
  for (std::size_t i = 0; i < poly.degree(); ++i) reg.push(0);
  Bits out(poly.degree());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>((reg.value() >> (out.size() - 1 - i)) & 1ULL);
  return out;
}

Bits crc_append(std::span<const std::uint8_t> message, const CrcPolynomial& poly) {
  Bits out(message.begin(), message.end());
  const Bits rem = crc_remainder(message, poly);
  out.insert(out.end(), rem.begin(), rem.end());
  return out;
}

bool crc_check(std::span<const std::uint8_t> received, const CrcPolynomial& poly) {
  if (received.size() < poly.degree()) throw ValidationError("received block shorter than the CRC");
  CrcRegister reg(poly);
  for (auto b : received) reg.push(b);
  return reg.value() == 0;
}

// ---------------------------------------------------------------------------
// 16-QAM

namespace {

const double kQamScale = 1.0 / std::sqrt(10.0);

constexpr double axis_level(unsigned pair) {
  switch (pair & 3U) {
    case 0b00: return -3.0;
    case 0b01: return -1.0;
    case 0b11: return 1.0;
    default: return 3.0;
  }
}

// Boundaries at -2, 0, 2; a value on a boundary takes the smaller label.
unsigned axis_decide(double x) {
  if (x <= -2.0) return 0b00;
  if (x <= 0.0) return 0b01;
  if (x < 2.0) return 0b11;
  return 0b10;
}

}  // namespace

cplx qam16_point(unsigned label) {
  return {axis_level(label >> 2) * kQamScale, axis_level(label) * kQamScale};
}

std::vector<cplx> qam16_modulate(std::span<const std::uint8_t> bits) {
  if (bits.size() % kBitsPerSymbol != 0) throw FormatError("16-QAM needs a multiple of 4 bits");
  std::vector<cplx> out(bits.size() / kBitsPerSymbol);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto* b = &bits[i * kBitsPerSymbol];
    const unsigned label = (b[0] & 1U) << 3 | (b[1] & 1U) << 2 | (b[2] & 1U) << 1 | (b[3] & 1U);
    out[i] = qam16_point(label);
  }
  return out;
}

unsigned qam16_decide(cplx z) {
  const double scale = std::sqrt(10.0);
  return axis_decide(z.real() * scale) << 2 | axis_decide(z.imag() * scale);
}

Bits qam16_detect(std::span<const cplx> symbols) {
  Bits out(symbols.size() * kBitsPerSymbol);
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const unsigned label = qam16_decide(symbols[i]);
    for (std::size_t j = 0; j < kBitsPerSymbol; ++j)
      out[i * kBitsPerSymbol + j] = static_cast<std::uint8_t>((label >> (3 - j)) & 1U);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

std::size_t LinkConfig::codeword_payload_bits() const {
  const std::size_t deg = CrcPolynomial(crc_poly).degree();
  const std::size_t per_stream = kBitsPerSymbol * n_sc;
  if (per_stream <= deg) throw ValidationError("codeword too short for the CRC");
  return per_stream - deg;
}

void LinkConfig::validate() const {
  if (n_t == 0 || n_r == 0 || n_sc == 0 || n_pilot == 0) throw ValidationError("link dimensions must be positive");
  if (n_pilot < n_t) throw ValidationError("n_pilot must be at least n_t for LS estimation");
  if (!(delta_f > 0.0)) throw ValidationError("subcarrier spacing must be positive");
  if (!std::isfinite(snr_db)) throw ValidationError("SNR must be finite");
  if (!(total_power > 0.0)) throw ValidationError("total power must be positive");
  (void)codeword_payload_bits();
}

double noise_var_from_snr(const LinkConfig& cfg) {
  const double rho = std::pow(10.0, cfg.snr_db / 10.0);
  if (!std::isfinite(cfg.snr_db) || !(rho > 0.0)) throw ValidationError("linear SNR must be positive");
  return cfg.total_power / (static_cast<double>(cfg.n_sc) * static_cast<double>(cfg.n_t) * rho);
}

double reference_symbol_power(const LinkConfig& cfg) {
  return cfg.total_power / (static_cast<double>(cfg.n_t) * static_cast<double>(cfg.n_sc));
}

// ---------------------------------------------------------------------------
// Channel estimation

CMatrix generate_pilots(std::size_t n_pilot, std::size_t n_t, std::uint64_t seed, PilotDesign design) {
  if (n_t == 0) throw ValidationError("n_t must be positive");
  if (n_pilot < n_t) throw ValidationError("n_pilot must be at least n_t");
  const auto rows = static_cast<Eigen::Index>(n_pilot);
  const auto cols = static_cast<Eigen::Index>(n_t);
  CMatrix x(rows, cols);

  if (design == PilotDesign::Orthogonal) {
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index t = 0; t < cols; ++t)
        x(i, t) = std::polar(1.0, -2.0 * kPi * static_cast<double>(i * t) / static_cast<double>(rows));
    return x;
  }

  constexpr double kMaxCondition = 1e3;
  const double h = 1.0 / std::sqrt(2.0);
  Rng rng(seed);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    for (Eigen::Index t = 0; t < cols; ++t)
      for (Eigen::Index i = 0; i < rows; ++i) {
        const auto r = rng();
        x(i, t) = {(r & 1U) ? h : -h, (r & 2U) ? h : -h};
      }
    Eigen::JacobiSVD<CMatrix> svd(x);
    const auto& s = svd.singularValues();
    if (s[cols - 1] > 0.0 && s[0] / s[cols - 1] <= kMaxCondition) return x;
  }
  throw NumericalError("could not draw a well-conditioned pilot matrix");
}

ChannelTensor ls_estimate(const PilotBlock& pb) {
  const auto& x = pb.x_pilot;
  if (pb.y_pilot.empty()) throw ValidationError("pilot block has no subcarriers");
  const auto n_t = static_cast<std::size_t>(x.cols());
  const auto n_r = static_cast<std::size_t>(pb.y_pilot.front().cols());

  const CMatrix gram = x.adjoint() * x;
  Eigen::LLT<CMatrix> llt(gram);
  if (llt.info() != Eigen::Success) throw NumericalError("X^H X is singular; pilots lack full column rank");
  const CMatrix pinv = llt.solve(x.adjoint());  // n_t x n_pilot
  if (!pinv.allFinite()) throw NumericalError("LS pseudo-inverse is not finite");

  ChannelTensor h(pb.y_pilot.size(), n_r, n_t);
  for (std::size_t k = 0; k < pb.y_pilot.size(); ++k) {
    const auto& y = pb.y_pilot[k];
    if (y.rows() != x.rows() || static_cast<std::size_t>(y.cols()) != n_r)
      throw ValidationError("pilot observation has the wrong shape");
    h.subcarrier(k) = (pinv * y).transpose();
  }
  return h;
}

PilotBlock transmit_pilots(const ChannelTensor& h_true, const CMatrix& pilots, const LinkConfig& cfg,
                           std::uint64_t seed) {
  if (static_cast<std::size_t>(pilots.cols()) != h_true.n_t()) throw ValidationError("pilot width != n_t");
  const double sigma = std::sqrt(noise_var_from_snr(cfg) / 2.0);
  PilotBlock pb;
  pb.x_pilot = std::sqrt(reference_symbol_power(cfg)) * pilots;
  pb.y_pilot.reserve(h_true.n_sc());
  Rng rng(seed);
  for (std::size_t k = 0; k < h_true.n_sc(); ++k) {
    CMatrix y = pb.x_pilot * h_true.subcarrier(k).transpose();
    for (Eigen::Index c = 0; c < y.cols(); ++c)
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const double re = standard_normal(rng);
        const double im = standard_normal(rng);
        y(r, c) += cplx(sigma * re, sigma * im);
      }
    pb.y_pilot.push_back(std::move(y));
  }
  return pb;
}

// ---------------------------------------------------------------------------
// Precoding, combining, equalization

std::vector<double> waterfill(std::span<const double> gains, double noise_var, double budget) {
  if (gains.empty()) throw ValidationError("waterfilling needs at least one mode");
  if (!(budget > 0.0)) throw ValidationError("power budget must be positive");
  if (noise_var < 0.0) throw ValidationError("noise variance must be non-negative");

  const std::size_t n = gains.size();
  std::vector<double> floor(n);  // noise_var / g^2, infinite for dead modes
  double min_floor = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (gains[i] < 0.0 || !std::isfinite(gains[i])) throw ValidationError("gains must be finite and non-negative");
    floor[i] = gains[i] > 0.0 ? noise_var / (gains[i] * gains[i]) : std::numeric_limits<double>::infinity();
    min_floor = std::min(min_floor, floor[i]);
  }
  if (!std::isfinite(min_floor)) throw ValidationError("no usable eigenmode: all gains are zero");

  auto allocated = [&](double mu) {
    double s = 0.0;
    for (double f : floor) s += std::max(0.0, mu - f);
    return s;
  };

  double lo = min_floor;
  double hi = min_floor + budget;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (allocated(mid) < budget ? lo : hi) = mid;
  }

  // Solve for the water level exactly on the active set the bisection found.
  double mu = 0.5 * (lo + hi);
  for (int pass = 0; pass < static_cast<int>(n) + 1; ++pass) {
    double sum_floor = 0.0;
    std::size_t active = 0;
    for (double f : floor)
      if (f < mu) {
        sum_floor += f;
        ++active;
      }
    if (active == 0) break;
    const double exact = (budget + sum_floor) / static_cast<double>(active);
    if (exact == mu) break;
    mu = exact;
  }

  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = std::max(0.0, mu - floor[i]);
  return p;
}

PrecodeSet svd_precoder(const ChannelTensor& h, double noise_var, double budget_per_subcarrier) {
  if (!h.all_finite()) throw ValidationError("channel estimate is not finite");
  const auto n_s = static_cast<Eigen::Index>(std::min(h.n_r(), h.n_t()));
  PrecodeSet out;
  out.subcarriers.reserve(h.n_sc());

  for (std::size_t k = 0; k < h.n_sc(); ++k) {
    const CMatrix hk = h.subcarrier(k);
    Eigen::JacobiSVD<CMatrix> svd(hk, Eigen::ComputeThinU | Eigen::ComputeThinV);
    CMatrix u = svd.matrixU().leftCols(n_s);
    CMatrix v = svd.matrixV().leftCols(n_s);
    const auto& s = svd.singularValues();
    if (!u.allFinite() || !v.allFinite() || !s.allFinite()) throw NumericalError("SVD did not converge");

    for (Eigen::Index i = 0; i < n_s; ++i) {
      Eigen::Index peak = 0;
      v.col(i).cwiseAbs().maxCoeff(&peak);
      const cplx ref = v(peak, i);
      const cplx rot = std::abs(ref) > 0.0 ? std::conj(ref) / std::abs(ref) : cplx(1.0, 0.0);
      v.col(i) *= rot;
      u.col(i) *= rot;
    }

    SubcarrierPrecoder sp;
    sp.sigma.assign(s.data(), s.data() + n_s);
    if (sp.sigma.front() > 0.0) {
      sp.power = waterfill(sp.sigma, noise_var, budget_per_subcarrier);
    } else {
      sp.power.assign(static_cast<std::size_t>(n_s), 0.0);
    }
    sp.f = v;
    for (Eigen::Index i = 0; i < n_s; ++i) sp.f.col(i) *= std::sqrt(sp.power[static_cast<std::size_t>(i)]);
    sp.g = std::move(u);
    out.subcarriers.push_back(std::move(sp));
  }
  return out;
}

CMatrix mmse_equalizer(const CMatrix& h_eff, double noise_var) {
  if (!h_eff.allFinite()) throw ValidationError("effective channel is not finite");
  if (noise_var < 0.0) throw ValidationError("noise variance must be non-negative");
  const CMatrix hh = h_eff.adjoint();
  CMatrix gram = hh * h_eff;
  gram.diagonal().array() += noise_var;
  if (noise_var == 0.0) {
    Eigen::FullPivLU<CMatrix> lu(gram);
    if (!lu.isInvertible()) throw NumericalError("zero-forcing limit with a singular effective channel");
    return lu.solve(hh);
  }
  Eigen::LDLT<CMatrix> ldlt(gram);
  if (ldlt.info() != Eigen::Success) throw NumericalError("MMSE system could not be factorized");
  return ldlt.solve(hh);
}

// ---------------------------------------------------------------------------
// End-to-end

Bits random_payload(std::size_t n_bits, std::uint64_t seed) {
  Bits out(n_bits);
  Rng rng(seed);
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < n_bits; ++i) {
    if (i % 64 == 0) word = rng();
    out[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1ULL);
  }
  return out;
}

namespace {

void check_dims(const ChannelTensor& h, const LinkConfig& cfg, const char* what) {
  if (h.n_sc() != cfg.n_sc || h.n_r() != cfg.n_r || h.n_t() != cfg.n_t)
    throw ValidationError(std::string(what) + " dimensions do not match the link configuration");
}

}  // namespace

LinkResult run_link_once(const BitBlock& payload, const ChannelTensor& h_true, const ChannelTensor& h_recon,
                         const LinkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  check_dims(h_true, cfg, "true channel");
  check_dims(h_recon, cfg, "reconstructed channel");
  const CrcPolynomial poly(cfg.crc_poly);
  const std::size_t l_cw = cfg.codeword_payload_bits();
  if (payload.codeword_len != l_cw) throw ValidationError("payload codeword length does not match the link");
  if (payload.bits.empty()) throw ValidationError("empty payload");

  const std::size_t n_s = cfg.n_streams();
  const std::size_t n_cw = payload.codeword_count();
  const std::size_t n_sym = (n_cw + n_s - 1) / n_s;
  const std::size_t cw_bits = kBitsPerSymbol * cfg.n_sc;

  LinkResult result;
  result.tx_bits.assign(n_cw * l_cw, 0);
  std::copy(payload.bits.begin(), payload.bits.end(), result.tx_bits.begin());

  // Framed codewords; filler codewords beyond n_cw stay all-zero.
  std::vector<Bits> codewords(n_sym * n_s, Bits(cw_bits, 0));
  for (std::size_t n = 0; n < n_cw; ++n)
    codewords[n] = crc_append(std::span(result.tx_bits).subspan(n * l_cw, l_cw), poly);

  const double noise_var = noise_var_from_snr(cfg);
  const PrecodeSet pre = svd_precoder(h_recon, noise_var, cfg.total_power / static_cast<double>(cfg.n_sc));

  struct Chain {
    CMatrix signal;  // W G^H H_true F
    CMatrix noise;   // W G^H
    std::vector<double> inv_gain;
  };
  std::vector<Chain> chain(cfg.n_sc);
  for (std::size_t k = 0; k < cfg.n_sc; ++k) {
    const auto& sp = pre.subcarriers[k];
    const CMatrix gh = sp.g.adjoint();
    const CMatrix assumed = gh * CMatrix(h_recon.subcarrier(k)) * sp.f;
    const CMatrix w = mmse_equalizer(assumed, noise_var);
    const CMatrix bias = w * assumed;
    chain[k].signal = w * gh * CMatrix(h_true.subcarrier(k)) * sp.f;
    chain[k].noise = w * gh;
    chain[k].inv_gain.resize(n_s);
    for (std::size_t i = 0; i < n_s; ++i) {
      const double g = bias(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real();
      chain[k].inv_gain[i] = g > 1e-12 ? 1.0 / g : 0.0;
    }
  }

  Rng rng(seed);
  const double sigma = std::sqrt(noise_var / 2.0);
  std::vector<Bits> received(n_sym * n_s, Bits(cw_bits, 0));
  CVector s(static_cast<Eigen::Index>(n_s));
  CVector noise(static_cast<Eigen::Index>(cfg.n_r));

  for (std::size_t t = 0; t < n_sym; ++t) {
    for (std::size_t k = 0; k < cfg.n_sc; ++k) {
      for (std::size_t i = 0; i < n_s; ++i) {
        const auto& cw = codewords[t * n_s + i];
        const unsigned label = cw[4 * k] << 3 | cw[4 * k + 1] << 2 | cw[4 * k + 2] << 1 | cw[4 * k + 3];
        s[static_cast<Eigen::Index>(i)] = qam16_point(label);
      }
      for (Eigen::Index r = 0; r < noise.size(); ++r) {
        const double re = standard_normal(rng);
        const double im = standard_normal(rng);
        noise[r] = cplx(sigma * re, sigma * im);
      }
      const CVector z = chain[k].signal * s + chain[k].noise * noise;
      for (std::size_t i = 0; i < n_s; ++i) {
        const unsigned label = qam16_decide(z[static_cast<Eigen::Index>(i)] * chain[k].inv_gain[i]);
        auto& rx = received[t * n_s + i];
        for (std::size_t j = 0; j < kBitsPerSymbol; ++j)
          rx[4 * k + j] = static_cast<std::uint8_t>((label >> (3 - j)) & 1U);
      }
    }
  }

  result.rx_bits.resize(n_cw * l_cw);
  result.crc_failed.resize(n_cw);
  for (std::size_t n = 0; n < n_cw; ++n) {
    const auto& rx = received[n];
    result.crc_failed[n] = !crc_check(rx, poly);
    std::copy_n(rx.begin(), l_cw, result.rx_bits.begin() + static_cast<std::ptrdiff_t>(n * l_cw));
  }
  for (std::size_t i = 0; i < result.rx_bits.size(); ++i)
    result.bit_errors += result.rx_bits[i] != result.tx_bits[i];
  return result;
}

}  // namespace csifb
