#include "csifb/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "json.hpp"

#include "csifb/errors.hpp"
#include "csifb/rng.hpp"

namespace csifb {

namespace {

using json = nlohmann::json;

// Stream tags for derive_seed.
enum : std::uint64_t {
  kTagPilots = 0x50494c4f54ULL,
  kTagTrainChannel = 0x5452434855ULL,
  kTagTrainNoise = 0x54524e4f49ULL,
  kTagModel = 0x4d4f44454cULL,
  kTagChannel = 0x4348414e4eULL,
  kTagPilotNoise = 0x504e4f4953ULL,
  kTagDataNoise = 0x444e4f4953ULL,
  kTagPayload = 0x5041594c4fULL,
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Results are written
// by index, so the outcome does not depend on scheduling.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(where + key, e.what());
  }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return it.key() == k; }))
      throw SchemaError(where + it.key(), "unknown field");
  }
}

std::string kappa_label(double kappa) { return fmt::format("{}", kappa); }

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  link_at(0.0).validate();
  if (profiles.empty()) throw ValidationError("at least one channel profile is required");
  if (kappas.empty()) throw ValidationError("at least one compression ratio is required");
  for (double k : kappas)
    if (!(k > 0.0 && k < 1.0)) throw ValidationError("compression ratios must lie in (0, 1)");
  if (std::set<double>(kappas.begin(), kappas.end()).size() != kappas.size())
    throw ValidationError("compression ratios must be distinct");
  if (kappas.size() > 255) throw ValidationError("at most 255 compression ratios fit the wire format");
  if (rhos_db.empty()) throw ValidationError("at least one SNR point is required");
  for (double r : rhos_db)
    if (!std::isfinite(r)) throw ValidationError("SNR points must be finite");
  if (n_users == 0) throw ValidationError("n_users must be at least 1");
  if (payload_bits == 0) throw ValidationError("payload_bits must be positive");
  if (n_blocks == 0) throw ValidationError("n_blocks must be positive");
  if (train.epochs == 0 || train.batch == 0 || train.samples < 2) throw ValidationError("invalid training settings");
  if (!(train.lr > 0.0)) throw ValidationError("learning rate must be positive");
  if (!(b_max >= 0.0 && b_max <= 1.0)) throw ValidationError("b_max must be in [0, 1]");
  if (bits_per_element != 32 && bits_per_element != 64) throw ValidationError("bits_per_element must be 32 or 64");
  if (std::find(kappas.begin(), kappas.end(), static_kappa) == kappas.end())
    throw ValidationError("static_kappa must be one of the configured compression ratios");
  const auto sched = schedule_slots(pattern, train.samples, pattern_parameter);
  if (sched.count(SlotRole::Train) < 2) throw ValidationError("the slot schedule leaves fewer than two training slots");
}

ChannelLayout ExperimentConfig::layout() const {
  return ChannelLayout{UraGeometry(ura_rows, ura_cols), link.n_r, link.n_sc, link.delta_f};
}

CodecDims ExperimentConfig::codec_dims() const { return {link.n_sc, link.n_r, ura_rows * ura_cols}; }

LinkConfig ExperimentConfig::link_at(double rho_db) const {
  LinkConfig c = link;
  c.n_t = ura_rows * ura_cols;
  c.snr_db = rho_db;
  return c;
}

std::string ExperimentConfig::ura_label() const { return fmt::format("{}x{}", ura_rows, ura_cols); }

ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError("<document>", e.what());
  }
  if (!doc.is_object()) throw SchemaError("<document>", "expected an object");
  reject_unknown(doc,
                 {"profiles", "ura", "link", "kappas", "rhos_db", "n_users", "payload_bits", "n_blocks", "train",
                  "b_max", "master_seed", "pattern", "static_kappa", "bits_per_element", "eval_user_offset"},
                 "");

  ExperimentConfig cfg;
  for (const auto& p : get_or<std::vector<std::string>>(doc, "profiles", {}, "")) {
    std::filesystem::path path(p);
    cfg.profiles.push_back(path.is_relative() && !base_dir.empty() ? base_dir / path : path);
  }
  if (auto it = doc.find("ura"); it != doc.end()) {
    if (!it->is_object()) throw SchemaError("ura", "expected an object");
    reject_unknown(*it, {"rows", "cols"}, "ura.");
    cfg.ura_rows = get_or<std::size_t>(*it, "rows", cfg.ura_rows, "ura.");
    cfg.ura_cols = get_or<std::size_t>(*it, "cols", cfg.ura_cols, "ura.");
  }
  if (auto it = doc.find("link"); it != doc.end()) {
    if (!it->is_object()) throw SchemaError("link", "expected an object");
    reject_unknown(*it, {"n_r", "n_sc", "n_pilot", "delta_f_hz", "crc_poly", "total_power", "pilots"}, "link.");
    auto& l = cfg.link;
    l.n_r = get_or<std::size_t>(*it, "n_r", l.n_r, "link.");
    l.n_sc = get_or<std::size_t>(*it, "n_sc", l.n_sc, "link.");
    l.n_pilot = get_or<std::size_t>(*it, "n_pilot", l.n_pilot, "link.");
    l.delta_f = get_or<double>(*it, "delta_f_hz", l.delta_f, "link.");
    l.crc_poly = get_or<std::string>(*it, "crc_poly", l.crc_poly, "link.");
    l.total_power = get_or<double>(*it, "total_power", l.total_power, "link.");
    const auto pilots = get_or<std::string>(*it, "pilots", "random_qpsk", "link.");
    if (pilots == "random_qpsk")
      l.pilots = PilotDesign::RandomQpsk;
    else if (pilots == "orthogonal")
      l.pilots = PilotDesign::Orthogonal;
    else
      throw SchemaError("link.pilots", "expected random_qpsk or orthogonal");
  }
  cfg.kappas = get_or<std::vector<double>>(doc, "kappas", cfg.kappas, "");
  cfg.rhos_db = get_or<std::vector<double>>(doc, "rhos_db", cfg.rhos_db, "");
  cfg.n_users = get_or<std::size_t>(doc, "n_users", cfg.n_users, "");
  cfg.payload_bits = get_or<std::size_t>(doc, "payload_bits", cfg.payload_bits, "");
  cfg.n_blocks = get_or<std::size_t>(doc, "n_blocks", cfg.n_blocks, "");
  if (auto it = doc.find("train"); it != doc.end()) {
    if (!it->is_object()) throw SchemaError("train", "expected an object");
    reject_unknown(*it, {"epochs", "batch", "lr", "samples", "val_fraction"}, "train.");
    auto& t = cfg.train;
    t.epochs = get_or<std::size_t>(*it, "epochs", t.epochs, "train.");
    t.batch = get_or<std::size_t>(*it, "batch", t.batch, "train.");
    t.lr = get_or<double>(*it, "lr", t.lr, "train.");
    t.samples = get_or<std::size_t>(*it, "samples", t.samples, "train.");
    t.val_fraction = get_or<double>(*it, "val_fraction", t.val_fraction, "train.");
  }
  cfg.b_max = get_or<double>(doc, "b_max", cfg.b_max, "");
  cfg.master_seed = get_or<std::uint64_t>(doc, "master_seed", cfg.master_seed, "");
  if (auto it = doc.find("pattern"); it != doc.end()) {
    if (!it->is_object()) throw SchemaError("pattern", "expected an object");
    reject_unknown(*it, {"type", "parameter"}, "pattern.");
    const auto type = get_or<std::string>(*it, "type", "duty_cycle", "pattern.");
    if (type == "duty_cycle") {
      cfg.pattern = SlotPattern::DutyCycle;
    } else if (type == "staggered") {
      cfg.pattern = SlotPattern::Staggered;
      cfg.pattern_parameter = 2.0;
    } else {
      throw SchemaError("pattern.type", "expected duty_cycle or staggered");
    }
    cfg.pattern_parameter = get_or<double>(*it, "parameter", cfg.pattern_parameter, "pattern.");
  }
  cfg.static_kappa = get_or<double>(doc, "static_kappa", cfg.static_kappa, "");
  cfg.bits_per_element = static_cast<std::uint8_t>(get_or<unsigned>(doc, "bits_per_element", 32U, ""));
  cfg.eval_user_offset = get_or<std::uint64_t>(doc, "eval_user_offset", cfg.eval_user_offset, "");
  cfg.link.n_t = cfg.ura_rows * cfg.ura_cols;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

// ---------------------------------------------------------------------------
// Codec training

namespace {

CMatrix experiment_pilots(const ExperimentConfig& cfg) {
  return generate_pilots(cfg.link.n_pilot, cfg.ura_rows * cfg.ura_cols, derive_seed(cfg.master_seed, {kTagPilots}),
                         cfg.link.pilots);
}

ChannelTensor estimate(const ExperimentConfig& cfg, const CMatrix& pilots, const ChannelTensor& h, double rho_db,
                       std::uint64_t seed) {
  return ls_estimate(transmit_pilots(h, pilots, cfg.link_at(rho_db), seed));
}

std::filesystem::path cache_path(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                                 const CdlProfile& profile, double kappa, std::uint64_t seed) {
  return dir / fmt::format("{}_{}_k{}_s{:016x}.csim", profile.name, cfg.ura_label(), kappa, seed);
}

}  // namespace

ProfileCodecs train_codecs(const ExperimentConfig& cfg, const CdlProfile& profile, std::size_t profile_index,
                           const RunOptions& opts) {
  cfg.validate();
  const auto layout = cfg.layout();
  const CMatrix pilots = experiment_pilots(cfg);
  const SlotSchedule schedule = schedule_slots(cfg.pattern, cfg.train.samples, cfg.pattern_parameter);
  const auto p = static_cast<std::uint64_t>(profile_index);

  // Every slot observes one user channel estimated at an SNR cycling over the sweep grid.
  std::vector<ChannelTensor> train_set, infer_set;
  for (std::size_t i = 0; i < schedule.frame_length; ++i) {
    const auto slot = static_cast<std::uint64_t>(i);
    const ChannelTensor h = synthesize_csi(profile, layout, derive_seed(cfg.master_seed, {kTagTrainChannel, p, slot}));
    const double rho = cfg.rhos_db[i % cfg.rhos_db.size()];
    ChannelTensor est = estimate(cfg, pilots, h, rho, derive_seed(cfg.master_seed, {kTagTrainNoise, p, slot}));
    (schedule.assignment[i] == SlotRole::Train ? train_set : infer_set).push_back(std::move(est));
  }
  const RMatrix train_data = make_codec_dataset(train_set);
  const RMatrix infer_data = make_codec_dataset(infer_set);
  train_set.clear();
  infer_set.clear();

  ProfileCodecs out;
  out.profile = profile;
  out.profile_index = profile_index;
  std::vector<AutoencoderModel> models(cfg.kappas.size());
  out.reports.resize(cfg.kappas.size());

  parallel_for(cfg.kappas.size(), opts.threads, [&](std::size_t ki) {
    const double kappa = cfg.kappas[ki];
    const std::uint64_t seed = derive_seed(cfg.master_seed, {kTagModel, p, static_cast<std::uint64_t>(ki)});
    auto& report = out.reports[ki];
    report.kappa = kappa;
    const auto t0 = std::chrono::steady_clock::now();

    std::optional<std::filesystem::path> cached;
    if (opts.cache_dir) cached = cache_path(*opts.cache_dir, cfg, profile, kappa, seed);
    if (cached && std::filesystem::exists(*cached)) {
      models[ki] = load_model(*cached);
      report.from_cache = true;
    } else {
      models[ki] = ae_init(kappa, cfg.codec_dims(), seed);
      report.history = train(models[ki], train_data, TrainOptions{cfg.train.epochs, cfg.train.batch, cfg.train.lr,
                                                                  cfg.train.val_fraction, seed});
      if (cached) {
        std::filesystem::create_directories(*opts.cache_dir);
        save_model(models[ki], *cached);
      }
    }

    const auto& model = models[ki];
    if (infer_data.cols() > 0) {
      const RMatrix x = normalize(infer_data, model.norm());
      const RMatrix y = ae_decode(model, ae_encode(model, x));
      for (Eigen::Index c = 0; c < x.cols(); ++c) report.inference_losses.push_back(mse_loss(RVector(x.col(c)), RVector(y.col(c))));
    }
    report.codec_seconds = seconds_since(t0);
    if (!report.inference_losses.empty() && !report.history.train_loss.empty())
      report.invalidated = check_invalidation(report.inference_losses,
                                              default_invalidation_threshold(report.history.train_loss.back()));
  });

  for (auto& m : models) out.bank.add(std::move(m));
  return out;
}

// ---------------------------------------------------------------------------
// Link evaluation

std::vector<PointResult> evaluate_point(const ExperimentConfig& cfg, const ProfileCodecs& codecs, double rho_db,
                                        std::uint64_t user_seed, const std::vector<double>& kappas) {
  const auto layout = cfg.layout();
  const LinkConfig link = cfg.link_at(rho_db);
  const CMatrix pilots = experiment_pilots(cfg);
  const auto p = static_cast<std::uint64_t>(codecs.profile_index);
  const auto rho_tag = std::bit_cast<std::uint64_t>(rho_db);

  std::vector<std::size_t> bank_index(kappas.size(), 0);
  for (std::size_t i = 0; i < kappas.size(); ++i)
    if (kappas[i] != kNoCompression) bank_index[i] = codecs.bank.index_of(kappas[i]);

  const std::size_t l_cw = link.codeword_payload_bits();
  const Bits payload = random_payload(cfg.payload_bits, derive_seed(user_seed, {kTagPayload, p}));
  const std::size_t n_cw = (payload.size() + l_cw - 1) / l_cw;
  const std::size_t cw_per_block = (n_cw + cfg.n_blocks - 1) / cfg.n_blocks;
  const std::uint64_t channel_seed = derive_seed(user_seed, {kTagChannel, p});

  std::vector<PointResult> out(kappas.size());
  std::size_t blocks_used = 0;
  for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
    const std::size_t first = b * cw_per_block * l_cw;
    if (first >= payload.size()) break;
    const std::size_t last = std::min(payload.size(), first + cw_per_block * l_cw);
    const BitBlock chunk{Bits(payload.begin() + static_cast<std::ptrdiff_t>(first),
                              payload.begin() + static_cast<std::ptrdiff_t>(last)),
                         l_cw};
    ++blocks_used;

    const auto block = static_cast<std::uint64_t>(b);
    const ChannelTensor h = synthesize_block(codecs.profile, layout, channel_seed, b);
    const ChannelTensor h_hat =
        estimate(cfg, pilots, h, rho_db, derive_seed(user_seed, {kTagPilotNoise, p, rho_tag, block}));
    const RVector h_hat_real = realify(vectorize_csi(h_hat));
    const std::uint64_t noise_seed = derive_seed(user_seed, {kTagDataNoise, p, rho_tag, block});

    for (std::size_t i = 0; i < kappas.size(); ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      ChannelTensor recon = h_hat;
      if (kappas[i] != kNoCompression) {
        const LatentCsi latent = codecs.bank.compress(bank_index[i], h_hat, cfg.bits_per_element);
        recon = codecs.bank.decompress(latent);
        out[i].recon_mse += mse_loss(h_hat_real, realify(vectorize_csi(recon)));
      }
      const LinkResult r = run_link_once(chunk, h, recon, link, noise_seed);
      auto& c = out[i].counts;
      c.bit_errors += r.bit_errors;
      c.bits_total += r.tx_bits.size();
      c.block_errors += static_cast<std::uint64_t>(std::count(r.crc_failed.begin(), r.crc_failed.end(), true));
      c.blocks_total += r.crc_failed.size();
      out[i].eval_seconds += seconds_since(t0);
    }
  }
  for (auto& r : out) r.recon_mse /= static_cast<double>(std::max<std::size_t>(1, blocks_used));
  return out;
}

// ---------------------------------------------------------------------------
// Sweep

SweepResult run_sweep(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  SweepResult result;
  std::vector<double> variants{kNoCompression};
  variants.insert(variants.end(), cfg.kappas.begin(), cfg.kappas.end());

  for (std::size_t p = 0; p < cfg.profiles.size(); ++p) {
    result.codecs.push_back(train_codecs(cfg, load_cdl_profile(cfg.profiles[p]), p, opts));
    const auto& codecs = result.codecs.back();

    const std::size_t n_points = cfg.rhos_db.size() * cfg.n_users;
    std::vector<std::vector<PointResult>> points(n_points);
    parallel_for(n_points, opts.threads, [&](std::size_t i) {
      const std::size_t ri = i / cfg.n_users;
      const std::size_t u = i % cfg.n_users;
      points[i] = evaluate_point(cfg, codecs, cfg.rhos_db[ri], cfg.user_seed(u), variants);
    });

    for (std::size_t v = 0; v < variants.size(); ++v) {
      const double train_seconds = v == 0 ? 0.0 : codecs.reports[v - 1].codec_seconds;
      for (std::size_t ri = 0; ri < cfg.rhos_db.size(); ++ri) {
        for (std::size_t u = 0; u < cfg.n_users; ++u) {
          const auto& pr = points[ri * cfg.n_users + u][v];
          result.rows.push_back({codecs.profile.name, cfg.ura_label(), variants[v], cfg.rhos_db[ri], cfg.user_seed(u),
                                 pr.counts, pr.recon_mse, train_seconds, pr.eval_seconds});
        }
      }
    }
  }
  return result;
}

void write_sweep_csv(const SweepResult& result, std::ostream& out) {
  out << "profile,ura,kappa,rho_db,user_seed,ber,ber_stderr,bler,bler_stderr,recon_mse,bits,blocks\n";
  for (const auto& r : result.rows) {
    out << fmt::format("{},{},{},{},{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{},{}\n", r.profile, r.ura,
                       kappa_label(r.kappa), r.rho_db, r.user_seed, r.counts.ber(), r.counts.ber_stderr(),
                       r.counts.bler(), r.counts.bler_stderr(), r.recon_mse, r.counts.bits_total,
                       r.counts.blocks_total);
  }
}

void write_timing_csv(const SweepResult& result, std::ostream& out) {
  out << "profile,ura,kappa,rho_db,user_seed,train_seconds,eval_seconds\n";
  for (const auto& r : result.rows)
    out << fmt::format("{},{},{},{},{},{:.6f},{:.6f}\n", r.profile, r.ura, kappa_label(r.kappa), r.rho_db,
                       r.user_seed, r.train_seconds, r.eval_seconds);
}

void write_codec_csv(const SweepResult& result, std::ostream& out) {
  out << "profile,kappa,latent_dim,epochs,final_train_loss,final_val_loss,mean_inference_loss,invalidated,"
         "from_cache,codec_seconds\n";
  for (const auto& c : result.codecs) {
    for (std::size_t i = 0; i < c.reports.size(); ++i) {
      const auto& r = c.reports[i];
      const double train_loss = r.history.train_loss.empty() ? std::nan("") : r.history.train_loss.back();
      const double val_loss = r.history.val_loss.empty() ? std::nan("") : r.history.val_loss.back();
      double inf = 0.0;
      for (double l : r.inference_losses) inf += l;
      if (!r.inference_losses.empty()) inf /= static_cast<double>(r.inference_losses.size());
      out << fmt::format("{},{},{},{},{:.9g},{:.9g},{:.9g},{},{},{:.6f}\n", c.profile.name, kappa_label(r.kappa),
                         c.bank.at(i).latent_dim(), r.history.train_loss.size(), train_loss, val_loss, inf,
                         r.invalidated ? 1 : 0, r.from_cache ? 1 : 0, r.codec_seconds);
    }
  }
}

std::vector<MeasurementRecord> measurement_records(const SweepResult& sweep, double b_max) {
  std::vector<MeasurementRecord> out;
  out.reserve(sweep.rows.size());
  for (const auto& r : sweep.rows)
    out.push_back(MeasurementRecord::make(r.rho_db, r.kappa, r.counts.ber(), r.counts.bler(), b_max, r.profile,
                                          r.user_seed));
  return out;
}

// ---------------------------------------------------------------------------
// Adaptive experiment

AdaptiveResult run_adaptive_experiment(const ExperimentConfig& cfg, const SweepResult& sweep, const RunOptions& opts) {
  cfg.validate();
  std::vector<double> centers(cfg.rhos_db);
  std::sort(centers.begin(), centers.end());
  centers.erase(std::unique(centers.begin(), centers.end()), centers.end());
  const SnrBuckets buckets(centers);
  const auto records = measurement_records(sweep, cfg.b_max);
  const AdaptiveDataset dataset = build_dataset(records, buckets);

  AdaptiveResult result;
  for (const auto& codecs : sweep.codecs) {
    const PolicyTable policy = build_policy(dataset, codecs.profile.name, cfg.b_max);
    result.policies.push_back(policy);

    // Each rho point gathers the three traces on the same evaluation users.
    const std::size_t n_points = cfg.rhos_db.size() * cfg.n_users;
    std::vector<std::vector<PointResult>> points(n_points);
    std::vector<std::vector<double>> point_kappas(n_points);
    parallel_for(n_points, opts.threads, [&](std::size_t i) {
      const double rho = cfg.rhos_db[i / cfg.n_users];
      const std::uint64_t user = cfg.master_seed + cfg.eval_user_offset + i % cfg.n_users;
      point_kappas[i] = {policy.lookup(rho), cfg.static_kappa, kNoCompression};
      points[i] = evaluate_point(cfg, codecs, rho, user, point_kappas[i]);
    });

    const char* schemes[] = {"adaptive", "static", "no_compression"};
    for (std::size_t ri = 0; ri < cfg.rhos_db.size(); ++ri) {
      const double rho = cfg.rhos_db[ri];
      for (std::size_t s = 0; s < 3; ++s) {
        ErrorCounts total;
        for (std::size_t u = 0; u < cfg.n_users; ++u) total = merge(total, points[ri * cfg.n_users + u][s].counts);
        result.rows.push_back({codecs.profile.name, rho, schemes[s], point_kappas[ri * cfg.n_users][s], total});
      }
    }
  }
  return result;
}

AdaptiveResult run_adaptive_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  return run_adaptive_experiment(cfg, run_sweep(cfg, opts), opts);
}

void write_adaptive_csv(const AdaptiveResult& result, std::ostream& out) {
  out << "profile,rho_db,scheme,kappa,ber,ber_stderr,bler,bler_stderr,blocks\n";
  for (const auto& r : result.rows)
    out << fmt::format("{},{},{},{},{:.9g},{:.9g},{:.9g},{:.9g},{}\n", r.profile, r.rho_db, r.scheme,
                       kappa_label(r.kappa), r.counts.ber(), r.counts.ber_stderr(), r.counts.bler(),
                       r.counts.bler_stderr(), r.counts.blocks_total);
}

// ---------------------------------------------------------------------------
// Heatmaps and histories

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw ValidationError("pearson needs two equal-length series");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

Heatmap emit_csi_heatmap(const ExperimentConfig& cfg, const ProfileCodecs& codecs, double kappa, double rho_db,
                         std::size_t user) {
  const std::size_t ki = codecs.bank.index_of(kappa);
  const auto p = static_cast<std::uint64_t>(codecs.profile_index);
  const std::uint64_t user_seed = cfg.user_seed(user);
  const ChannelTensor h = synthesize_block(codecs.profile, cfg.layout(), derive_seed(user_seed, {kTagChannel, p}), 0);
  const ChannelTensor h_hat = estimate(cfg, experiment_pilots(cfg), h, rho_db,
                                       derive_seed(user_seed, {kTagPilotNoise, p, std::bit_cast<std::uint64_t>(rho_db), 0}));
  const LatentCsi latent = codecs.bank.compress(ki, h_hat, cfg.bits_per_element);
  const ChannelTensor recon = codecs.bank.decompress(latent);

  auto rx0 = [](const ChannelTensor& t) {
    Grid g{t.n_sc(), t.n_t(), {}};
    g.values.reserve(g.rows * g.cols);
    for (std::size_t k = 0; k < t.n_sc(); ++k)
      for (std::size_t tx = 0; tx < t.n_t(); ++tx) g.values.push_back(std::abs(t(k, 0, tx)));
    return g;
  };

  Heatmap hm;
  hm.original = rx0(h_hat);
  hm.reconstructed = rx0(recon);
  hm.latent.rows = 2 * h.n_r() * h.n_t();
  hm.latent.cols = latent.values.size() / hm.latent.rows;
  for (double v : latent.values) hm.latent.values.push_back(std::abs(v));
  hm.pearson = pearson(hm.original.values, hm.reconstructed.values);
  return hm;
}

void write_grid_csv(const Grid& grid, std::ostream& out) {
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      if (c) out << ',';
      out << fmt::format("{:.9g}", grid.values[r * grid.cols + c]);
    }
    out << '\n';
  }
}

void emit_history(const TrainHistory& history, std::ostream& out) {
  out << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < history.train_loss.size(); ++e)
    out << fmt::format("{},{:.9g},{:.9g}\n", e + 1, history.train_loss[e], history.val_loss[e]);
}

bool history_trend_decreasing(const TrainHistory& history) {
  return history.train_loss.size() >= 2 && history.train_loss.back() < history.train_loss.front();
}

}  // namespace csifb
