// Runs the desk-scale acceptance checks and prints one PASS/FAIL line per
// criterion. Exit status is non-zero when any criterion fails.

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "csifb/experiment.hpp"
#include "csifb/rng.hpp"
#include "oracles.hpp"

using namespace csifb;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

void report(int id, const std::string& title, const Verdict& v, int& failures) {
  std::cout << fmt::format("criterion {} {}: {}  {}\n", id, title, v.pass ? "PASS" : "FAIL", v.detail) << std::flush;
  if (!v.pass) ++failures;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe r;
  if (xs.empty()) return r;
  r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.se = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  }
  return r;
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return rank;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson(ra, rb);
}

// Per-user BER grouped by (profile, kappa, rho).
using BerTable = std::map<std::tuple<std::string, double, double>, std::vector<double>>;

BerTable user_bers(const SweepResult& sweep) {
  BerTable t;
  for (const auto& row : sweep.rows) t[{row.profile, row.kappa, row.rho_db}].push_back(row.counts.ber());
  return t;
}

// --- 1 -----------------------------------------------------------------------

Verdict oracle_equivalences() {
  Verdict v;
  std::vector<std::string> notes;

  // LS against the normal-equation oracle.
  {
    ChannelTensor h(16, 4, 16);
    Rng rng(1);
    for (auto& z : h.data()) z = cplx(standard_normal(rng), standard_normal(rng)) / std::sqrt(2.0);
    LinkConfig cfg;
    cfg.n_sc = 16;
    cfg.snr_db = 5.0;
    const auto pb = transmit_pilots(h, generate_pilots(64, 16, 2), cfg, 3);
    const auto est = ls_estimate(pb);
    double worst = 0.0;
    for (std::size_t k = 0; k < h.n_sc(); ++k) {
      const Eigen::MatrixXcd ref = oracle::ls_pinv(pb.x_pilot, pb.y_pilot[k]).transpose();
      worst = std::max(worst, (CMatrix(est.subcarrier(k)) - ref).cwiseAbs().maxCoeff());
    }
    notes.push_back(fmt::format("ls {:.1e}", worst));
    v.pass &= worst < 1e-8;
  }

  // CRC against bitwise long division.
  {
    const CrcPolynomial poly(kDefaultCrcPoly);
    int mismatches = 0;
    for (std::uint64_t t = 0; t < 1000; ++t) {
      const Bits msg = random_payload(16 + t % 497, 100 + t);
      if (crc_remainder(msg, poly) != oracle::crc_long_division(msg, poly.coefficients())) ++mismatches;
    }
    notes.push_back(fmt::format("crc mismatches {}", mismatches));
    v.pass &= mismatches == 0;
  }

  // Adam against a scalar recurrence.
  {
    const AdamParams hp{1e-3, 0.9, 0.999, 1e-8};
    Rng rng(4);
    std::vector<double> p{0.3, -1.2, 2.0};
    std::vector<double> ref = p, m(3, 0.0), s(3, 0.0);
    AdamState st;
    double worst = 0.0;
    for (int step = 1; step <= 200; ++step) {
      std::vector<double> g(3);
      for (auto& x : g) x = standard_normal(rng);
      adam_step(p, g, st, hp);
      for (std::size_t i = 0; i < 3; ++i) {
        m[i] = hp.beta1 * m[i] + (1 - hp.beta1) * g[i];
        s[i] = hp.beta2 * s[i] + (1 - hp.beta2) * g[i] * g[i];
        const double mh = m[i] / (1 - std::pow(hp.beta1, step));
        const double sh = s[i] / (1 - std::pow(hp.beta2, step));
        ref[i] -= hp.lr * mh / (std::sqrt(sh) + hp.eps);
        worst = std::max(worst, std::abs(p[i] - ref[i]));
      }
    }
    notes.push_back(fmt::format("adam {:.1e}", worst));
    v.pass &= worst < 1e-12;
  }

  // Backprop against central differences on a tiny model.
  {
    auto model = AutoencoderModel::build(Architecture{8, {10, 10}, 4, {10}}, 9);
    Rng rng(10);
    for (auto& l : model.layers())
      for (auto& b : l.bias) b = 0.2 * standard_normal(rng);
    RMatrix batch(8, 5);
    for (auto& x : batch.reshaped()) x = uniform01(rng);
    const auto g = backprop(model, batch);
    auto loss = [&] { return mse_loss(batch, ae_decode(model, ae_encode(model, batch))); };
    const double h = 1e-5;
    double worst = 0.0;
    auto check = [&](double& param, double analytic) {
      const double saved = param;
      param = saved + h;
      const double up = loss();
      param = saved - h;
      const double down = loss();
      param = saved;
      const double numeric = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-7}));
    };
    for (std::size_t li = 0; li < model.layers().size(); ++li) {
      auto& l = model.layers()[li];
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) check(l.weight(r, c), g.layers[li].weight(r, c));
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) check(l.bias[r], g.layers[li].bias[r]);
    }
    notes.push_back(fmt::format("grad rel {:.1e}", worst));
    v.pass &= worst < 1e-4;
  }

  // Waterfilling against grid search, plus the KKT conditions.
  {
    Rng rng(12);
    double worst = 0.0;
    bool kkt = true;
    for (int t = 0; t < 200; ++t) {
      std::vector<double> gains(1 + rng() % 6);
      for (auto& x : gains) x = 0.05 + 2.0 * uniform01(rng);
      const double nv = 0.01 + uniform01(rng), budget = 0.1 + 3.0 * uniform01(rng);
      const auto p = waterfill(gains, nv, budget);
      const auto ref = oracle::waterfill_grid(gains, nv, budget);
      for (std::size_t i = 0; i < p.size(); ++i) worst = std::max(worst, std::abs(p[i] - ref[i]));
      const double total = std::accumulate(p.begin(), p.end(), 0.0);
      kkt &= std::abs(total - budget) <= 1e-9 * budget;
      double mu = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0) mu = p[i] + nv / (gains[i] * gains[i]);
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double floor = nv / (gains[i] * gains[i]);
        kkt &= p[i] > 0 ? std::abs(p[i] + floor - mu) <= 1e-8 * mu : floor >= mu * (1 - 1e-12);
      }
    }
    notes.push_back(fmt::format("waterfill {:.1e}{}", worst, kkt ? "" : " kkt violated"));
    v.pass &= worst < 1e-6 && kkt;
  }

  for (std::size_t i = 0; i < notes.size(); ++i) v.detail += (i ? ", " : "") + notes[i];
  return v;
}

// --- 2 -----------------------------------------------------------------------

Verdict compression_ordering(const ExperimentConfig& cfg, const BerTable& bers) {
  Verdict v;
  const std::string profile = "CDL-E";
  const double rho = 30.0;
  std::vector<double> kappas{0.0};
  kappas.insert(kappas.end(), cfg.kappas.begin(), cfg.kappas.end());
  std::sort(kappas.begin(), kappas.end());
  std::vector<MeanSe> stats;
  for (double k : kappas) {
    const auto it = bers.find({profile, k, rho});
    if (it == bers.end()) return {false, fmt::format("no rows for {} kappa {} at {} dB", profile, k, rho)};
    stats.push_back(mean_se(it->second));
  }
  std::vector<double> means;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    means.push_back(stats[i].mean);
    v.detail += fmt::format("ber(k={})={:.4g} ", kappas[i], stats[i].mean);
    if (i > 0) {
      const double pooled = std::hypot(stats[i - 1].se, stats[i].se);
      if (stats[i - 1].mean > stats[i].mean + 2 * pooled) v.pass = false;
    }
  }
  const double rs = spearman(kappas, means);
  v.detail += fmt::format("spearman={:.3f}", rs);
  v.pass &= rs >= 0.8;
  return v;
}

// --- 3 -----------------------------------------------------------------------

Verdict snr_monotone(const ExperimentConfig& cfg, const BerTable& bers) {
  Verdict v;
  std::vector<double> rhos = cfg.rhos_db;
  std::sort(rhos.begin(), rhos.end());
  std::vector<std::string> broken;
  std::size_t curves = 0;
  std::map<std::pair<std::string, double>, bool> seen;
  for (const auto& [key, _] : bers) seen[{std::get<0>(key), std::get<1>(key)}] = true;
  for (const auto& [pk, __] : seen) {
    ++curves;
    for (std::size_t i = 1; i < rhos.size(); ++i) {
      const auto a = mean_se(bers.at({pk.first, pk.second, rhos[i - 1]}));
      const auto b = mean_se(bers.at({pk.first, pk.second, rhos[i]}));
      if (b.mean > a.mean + 2 * std::hypot(a.se, b.se)) {
        broken.push_back(fmt::format("{}/k={} {}->{} dB ({:.4g}->{:.4g})", pk.first, pk.second, rhos[i - 1], rhos[i],
                                     a.mean, b.mean));
      }
    }
  }
  v.pass = broken.empty();
  v.detail = fmt::format("{} curves, {} increasing steps", curves, broken.size());
  for (std::size_t i = 0; i < std::min<std::size_t>(broken.size(), 4); ++i) v.detail += "; " + broken[i];
  if (broken.size() > 4) v.detail += "; ...";
  return v;
}

// --- 4 -----------------------------------------------------------------------

Verdict runtime_constancy(const SweepResult& sweep) {
  Verdict v;
  for (const auto& pc : sweep.codecs) {
    std::vector<double> t;
    for (const auto& r : pc.reports) t.push_back(r.codec_seconds);
    const double mean = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
    double var = 0.0;
    for (double x : t) var += (x - mean) * (x - mean);
    const double cv = std::sqrt(var / static_cast<double>(t.size())) / mean;
    v.detail += fmt::format("{} cv={:.1f}% (", pc.profile.name, 100 * cv);
    for (std::size_t i = 0; i < t.size(); ++i) v.detail += fmt::format("{}{:.1f}s", i ? " " : "", t[i]);
    v.detail += ") ";
    v.pass &= cv < 0.15;
  }
  return v;
}

// --- 5 -----------------------------------------------------------------------

Verdict loss_descent(const SweepResult& sweep) {
  Verdict v;
  std::size_t models = 0;
  for (const auto& pc : sweep.codecs) {
    for (const auto& r : pc.reports) {
      ++models;
      const auto& h = r.history;
      const bool descent = h.train_loss.size() >= 2 && h.train_loss.back() < h.train_loss.front();
      const double min_val = *std::min_element(h.val_loss.begin(), h.val_loss.end());
      const bool no_overfit = h.val_loss.back() <= 1.1 * min_val;
      if (!descent || !no_overfit) {
        v.pass = false;
        v.detail += fmt::format("{}/k={} train {:.4g}->{:.4g} val final {:.4g} min {:.4g}; ", pc.profile.name, r.kappa,
                                h.train_loss.front(), h.train_loss.back(), h.val_loss.back(), min_val);
      }
    }
  }
  v.detail = fmt::format("{} models, {} epochs each. ", models,
                         sweep.codecs.empty() ? 0 : sweep.codecs[0].reports[0].history.train_loss.size()) +
             v.detail;
  return v;
}

// --- 6 -----------------------------------------------------------------------

Verdict adaptive_dominance(const ExperimentConfig& cfg, const AdaptiveResult& ad) {
  Verdict v;
  std::map<std::pair<std::string, double>, std::map<std::string, const AdaptiveRow*>> by_point;
  for (const auto& row : ad.rows) by_point[{row.profile, row.rho_db}][row.scheme] = &row;

  std::size_t dominance_breaks = 0;
  for (const auto& [key, schemes] : by_point) {
    const auto* a = schemes.at("adaptive");
    const auto* n = schemes.at("no_compression");
    const auto* s = schemes.at("static");
    const auto* best = n->counts.bler() <= s->counts.bler() ? n : s;
    const double se = std::hypot(a->counts.bler_stderr(), best->counts.bler_stderr());
    if (a->counts.bler() > best->counts.bler() + 2 * se) {
      ++dominance_breaks;
      v.detail += fmt::format("{} {} dB adaptive {:.4g} > {} {:.4g}; ", key.first, key.second, a->counts.bler(),
                              best->scheme, best->counts.bler());
    }
  }

  std::size_t violations = 0;
  std::size_t compressed_rows = 0;
  for (const auto& p : ad.policies) {
    for (const auto& row : p.rows) {
      if (row.kappa == kNoCompression) continue;
      ++compressed_rows;
      if (!(row.measured_bler <= cfg.b_max)) ++violations;
    }
  }

  std::size_t far_at_top = 0;
  const double top = *std::max_element(cfg.rhos_db.begin(), cfg.rhos_db.end());
  for (const auto& [key, schemes] : by_point) {
    if (key.second != top) continue;
    const auto* a = schemes.at("adaptive");
    const auto* n = schemes.at("no_compression");
    const double se = std::hypot(a->counts.bler_stderr(), n->counts.bler_stderr());
    if (std::abs(a->counts.bler() - n->counts.bler()) > 2 * se) ++far_at_top;
  }

  v.pass = dominance_breaks == 0 && violations == 0 && far_at_top == 0;
  v.detail = fmt::format("dominance breaks {}, constraint violations {} (compressed bucket choices {}), "
                         "{} dB gaps {}. ",
                         dominance_breaks, violations, compressed_rows, top, far_at_top) +
             v.detail;
  return v;
}

// --- 7 -----------------------------------------------------------------------

Verdict dimensioning_and_wire() {
  Verdict v;
  std::size_t checked = 0, mismatches = 0;
  for (const std::size_t n_t : {std::size_t{16}, std::size_t{1024}}) {
    for (std::size_t tenth = 1; tenth <= 9; ++tenth) {
      const double kappa = static_cast<double>(tenth) / 10.0;
      // ceil((1 - kappa) n_sc) in integers.
      const std::size_t kept = ((10 - tenth) * 128 + 9) / 10;
      const std::size_t d = 2 * 4 * n_t * kept;
      ++checked;
      if (latent_dim(kappa, 128, 4, n_t) != d) ++mismatches;
      for (std::uint64_t count : {1u, 3u, 4u, 5u, 9u}) {
        std::uint64_t log2c = 0;
        while ((std::uint64_t{1} << log2c) < count) ++log2c;
        for (std::uint64_t b : {32u, 64u}) {
          ++checked;
          if (overhead_bits(b, d, count) != b * d + log2c) ++mismatches;
        }
      }
    }
  }

  Rng rng(77);
  std::size_t wire_failures = 0;
  for (int t = 0; t < 10000; ++t) {
    LatentCsi l;
    l.bits_per_element = (rng() & 1) ? 64 : 32;
    l.kappa_index = static_cast<std::uint8_t>(rng() % 256);
    l.dims = CodecDims{1 + rng() % 256, 1 + rng() % 8, 1 + rng() % 64};
    const std::size_t n = rng() % 64;
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t bits = rng();
      l.values.push_back(l.bits_per_element == 64
                             ? std::bit_cast<double>(bits)
                             : static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(bits))));
    }
    const auto bytes = serialize(l);
    const auto back = deserialize(bytes);
    bool same = back.values.size() == l.values.size() && back.kappa_index == l.kappa_index &&
                back.bits_per_element == l.bits_per_element && back.dims.n_sc == l.dims.n_sc &&
                back.dims.n_r == l.dims.n_r && back.dims.n_t == l.dims.n_t && serialize(back) == bytes;
    for (std::size_t i = 0; same && i < n; ++i) {
      if (l.bits_per_element == 64)
        same = std::bit_cast<std::uint64_t>(back.values[i]) == std::bit_cast<std::uint64_t>(l.values[i]);
      else
        same = std::bit_cast<std::uint32_t>(static_cast<float>(back.values[i])) ==
               std::bit_cast<std::uint32_t>(static_cast<float>(l.values[i]));
    }
    if (!same) ++wire_failures;
  }
  v.pass = mismatches == 0 && wire_failures == 0;
  v.detail = fmt::format("{} closed-form checks, {} mismatches; 10000 wire round trips, {} failures", checked,
                         mismatches, wire_failures);
  return v;
}

// --- 8 -----------------------------------------------------------------------

std::string sweep_csv(const SweepResult& r) {
  std::ostringstream out;
  write_sweep_csv(r, out);
  return out.str();
}

std::string adaptive_csv(const AdaptiveResult& r) {
  std::ostringstream out;
  write_adaptive_csv(r, out);
  for (const auto& p : r.policies) write_policy_csv(p, out);
  return out.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string config = CSIFB_ACCEPTANCE_CONFIG;
  std::string out_dir = "acceptance_out";
  std::size_t threads = 1;
  app.add_option("--config", config, "experiment config")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "directory for the CSV artifacts");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  int failures = 0;
  try {
    report(1, "oracle equivalences", oracle_equivalences(), failures);
    const Verdict wire = dimensioning_and_wire();

    const auto cfg = load_config(config);
    RunOptions opts;
    opts.threads = threads;
    fs::create_directories(out_dir);

    const auto t0 = std::chrono::steady_clock::now();
    const SweepResult sweep = run_sweep(cfg, opts);
    const AdaptiveResult ad = run_adaptive_experiment(cfg, sweep, opts);
    const double first_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << fmt::format("desk sweep and adaptive run: {:.0f} s\n", first_seconds) << std::flush;

    const std::string sweep_text = sweep_csv(sweep);
    const std::string adaptive_text = adaptive_csv(ad);
    write_file(fs::path(out_dir) / "sweep.csv", sweep_text);
    {
      std::ostringstream s;
      write_timing_csv(sweep, s);
      write_file(fs::path(out_dir) / "timing.csv", s.str());
      std::ostringstream c;
      write_codec_csv(sweep, c);
      write_file(fs::path(out_dir) / "codecs.csv", c.str());
      std::ostringstream a;
      write_adaptive_csv(ad, a);
      write_file(fs::path(out_dir) / "adaptive.csv", a.str());
    }

    const auto bers = user_bers(sweep);
    report(2, "monotone degradation with compression", compression_ordering(cfg, bers), failures);
    report(3, "monotone improvement with SNR", snr_monotone(cfg, bers), failures);
    report(4, "codec run-time constancy", runtime_constancy(sweep), failures);
    report(5, "loss descent without overfitting", loss_descent(sweep), failures);
    report(6, "adaptive policy dominance", adaptive_dominance(cfg, ad), failures);
    report(7, "dimensioning and wire format", wire, failures);

    const SweepResult again = run_sweep(cfg, opts);
    const AdaptiveResult ad_again = run_adaptive_experiment(cfg, again, opts);
    Verdict det;
    const bool sweep_same = sweep_csv(again) == sweep_text;
    const bool adaptive_same = adaptive_csv(ad_again) == adaptive_text;
    det.pass = sweep_same && adaptive_same;
    det.detail = fmt::format("sweep csv {} ({} bytes), adaptive and policy csv {}", sweep_same ? "identical" : "differs",
                             sweep_text.size(), adaptive_same ? "identical" : "differs");
    report(8, "determinism", det, failures);
  } catch (const std::exception& e) {
    std::cout << "acceptance run aborted: " << e.what() << "\n";
    return 2;
  }
  std::cout << fmt::format("{} of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
