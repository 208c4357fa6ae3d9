#include "csifb/chanmodel.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "csifb/errors.hpp"
#include "csifb/rng.hpp"

namespace csifb {

namespace {

constexpr double kDegToRad = kPi / 180.0;

double require_number(const nlohmann::json& obj, const std::string& key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(where + key, "missing");
  if (!it->is_number()) throw SchemaError(where + key, "expected a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw SchemaError(where + key, "not finite");
  return v;
}

}  // namespace

void CdlProfile::validate() const {
  if (clusters.empty()) throw ValidationError("profile '" + name + "' has no clusters");
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const auto& c = clusters[i];
    if (!(c.power > 0.0) || !std::isfinite(c.power))
      throw ValidationError("cluster " + std::to_string(i) + " power must be positive");
    if (!std::isfinite(c.delay_s) || c.delay_s < 0.0)
      throw ValidationError("cluster " + std::to_string(i) + " delay must be finite and non-negative");
  }
}

void CdlProfile::normalize_powers() {
  validate();
  const double total = std::accumulate(clusters.begin(), clusters.end(), 0.0,
                                       [](double acc, const Cluster& c) { return acc + c.power; });
  for (auto& c : clusters) c.power /= total;
}

CdlProfile parse_cdl_profile(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("<document>", e.what());
  }
  if (!doc.is_object()) throw SchemaError("<document>", "expected an object");

  CdlProfile profile;
  auto name = doc.find("name");
  if (name == doc.end() || !name->is_string()) throw SchemaError("name", "expected a string");
  profile.name = name->get<std::string>();

  auto los = doc.find("los");
  if (los == doc.end() || !los->is_boolean()) throw SchemaError("los", "expected a boolean");
  profile.los = los->get<bool>();

  auto clusters = doc.find("clusters");
  if (clusters == doc.end() || !clusters->is_array()) throw SchemaError("clusters", "expected an array");
  if (clusters->empty()) throw ValidationError("profile '" + profile.name + "' has no clusters");

  for (std::size_t i = 0; i < clusters->size(); ++i) {
    const auto& rec = (*clusters)[i];
    const std::string where = "clusters[" + std::to_string(i) + "].";
    if (!rec.is_object()) throw SchemaError(where.substr(0, where.size() - 1), "expected an object");
    Cluster c;
    c.delay_s = require_number(rec, "delay_s", where);
    c.power = std::pow(10.0, require_number(rec, "power_db", where) / 10.0);
    c.aod_azimuth = require_number(rec, "aod_az_deg", where) * kDegToRad;
    c.aod_zenith = require_number(rec, "aod_zen_deg", where) * kDegToRad;
    c.aoa_azimuth = require_number(rec, "aoa_az_deg", where) * kDegToRad;
    c.aoa_zenith = require_number(rec, "aoa_zen_deg", where) * kDegToRad;
    if (c.delay_s < 0.0) throw SchemaError(where + "delay_s", "negative delay");
    profile.clusters.push_back(c);
  }
  profile.normalize_powers();
  return profile;
}

CdlProfile load_cdl_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open profile file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_cdl_profile(buf.str());
}

CdlProfile truncate_clusters(const CdlProfile& profile, std::size_t count) {
  if (count == 0) throw ValidationError("cannot truncate a profile to zero clusters");
  CdlProfile out = profile;
  if (count < out.clusters.size()) out.clusters.resize(count);
  out.normalize_powers();
  return out;
}

UraGeometry::UraGeometry(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
  if (rows == 0 || cols == 0) throw ValidationError("array dimensions must be positive");
}

CVector steering_vector(const UraGeometry& geom, double azimuth, double zenith) {
  const double u = std::sin(zenith) * std::cos(azimuth);
  const double v = std::sin(zenith) * std::sin(azimuth);
  const double k = 2.0 * kPi * UraGeometry::kSpacingWavelengths;
  CVector a(static_cast<Eigen::Index>(geom.elements()));
  for (std::size_t p = 0; p < geom.rows(); ++p) {
    for (std::size_t q = 0; q < geom.cols(); ++q) {
      const double phase = k * (static_cast<double>(p) * u + static_cast<double>(q) * v);
      a[static_cast<Eigen::Index>(p * geom.cols() + q)] = std::polar(1.0, phase);
    }
  }
  return a;
}

ChannelTensor::ChannelTensor(std::size_t n_sc, std::size_t n_r, std::size_t n_t)
    : n_sc_(n_sc), n_r_(n_r), n_t_(n_t), data_(n_sc * n_r * n_t) {
  if (n_sc == 0 || n_r == 0 || n_t == 0) throw ValidationError("channel tensor dimensions must be positive");
}

Eigen::Map<CRowMatrix> ChannelTensor::subcarrier(std::size_t k) {
  return {data_.data() + k * n_r_ * n_t_, static_cast<Eigen::Index>(n_r_), static_cast<Eigen::Index>(n_t_)};
}

Eigen::Map<const CRowMatrix> ChannelTensor::subcarrier(std::size_t k) const {
  return {data_.data() + k * n_r_ * n_t_, static_cast<Eigen::Index>(n_r_), static_cast<Eigen::Index>(n_t_)};
}

bool ChannelTensor::all_finite() const noexcept {
  for (const auto& z : data_)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

double ChannelTensor::squared_norm() const noexcept {
  double s = 0.0;
  for (const auto& z : data_) s += std::norm(z);
  return s;
}

ChannelTensor synthesize_block(const CdlProfile& profile, const ChannelLayout& layout, std::uint64_t seed,
                               std::size_t block) {
  profile.validate();
  if (layout.n_r == 0 || layout.n_sc == 0) throw ValidationError("n_r and n_sc must be positive");
  if (!(layout.delta_f > 0.0)) throw ValidationError("subcarrier spacing must be positive");

  const std::size_t n_t = layout.tx.elements();
  const UraGeometry rx(layout.n_r, 1);
  ChannelTensor h(layout.n_sc, layout.n_r, n_t);

  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(block)}));

  for (const auto& c : profile.clusters) {
    const double phi = 2.0 * kPi * uniform01(rng);
    const CVector a_rx = steering_vector(rx, c.aoa_azimuth, c.aoa_zenith);
    const CVector a_tx = steering_vector(layout.tx, c.aod_azimuth, c.aod_zenith);
    const cplx gain = std::sqrt(c.power) * std::polar(1.0, phi);
    // Scalar loops: Eigen's vectorized paths depend on buffer alignment,
    // which would make the last bit vary between otherwise identical calls.
    std::vector<cplx> outer(layout.n_r * n_t);
    for (std::size_t r = 0; r < layout.n_r; ++r)
      for (std::size_t t = 0; t < n_t; ++t)
        outer[r * n_t + t] = gain * (a_rx[static_cast<Eigen::Index>(r)] * std::conj(a_tx[static_cast<Eigen::Index>(t)]));
    for (std::size_t k = 0; k < layout.n_sc; ++k) {
      const cplx rot = std::polar(1.0, -2.0 * kPi * c.delay_s * static_cast<double>(k) * layout.delta_f);
      cplx* dst = h.data().data() + k * outer.size();
      for (std::size_t i = 0; i < outer.size(); ++i) dst[i] += rot * outer[i];
    }
  }
  return h;
}

ChannelTensor synthesize_csi(const CdlProfile& profile, const ChannelLayout& layout, std::uint64_t seed) {
  return synthesize_block(profile, layout, seed, 0);
}

std::vector<ChannelTensor> draw_block_fading(const CdlProfile& profile, const ChannelLayout& layout,
                                             std::uint64_t seed, std::size_t n_blocks) {
  if (n_blocks == 0) throw ValidationError("n_blocks must be at least 1");
  std::vector<ChannelTensor> out;
  out.reserve(n_blocks);
  for (std::size_t b = 0; b < n_blocks; ++b) out.push_back(synthesize_block(profile, layout, seed, b));
  return out;
}

}  // namespace csifb
