#include "csifb/csi_codec.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "csifb/errors.hpp"
#include "csifb/rng.hpp"

namespace csifb {

// ---------------------------------------------------------------------------
// Complex-aware vectorization

RVector realify(const CVector& x) {
  const auto n = x.size();
  RVector out(2 * n);
  out.head(n) = x.real();
  out.tail(n) = x.imag();
  return out;
}

CVector complexify(const RVector& v) {
  if (v.size() % 2 != 0) throw ValidationError("realified vector must have even length");
  const auto n = v.size() / 2;
  CVector out(n);
  out.real() = v.head(n);
  out.imag() = v.tail(n);
  return out;
}

CVector vectorize_csi(const ChannelTensor& h) {
  return Eigen::Map<const CVector>(h.data().data(), static_cast<Eigen::Index>(h.size()));
}

ChannelTensor devectorize_csi(const CVector& v, std::size_t n_sc, std::size_t n_r, std::size_t n_t) {
  ChannelTensor h(n_sc, n_r, n_t);
  if (static_cast<std::size_t>(v.size()) != h.size()) throw ValidationError("vector length does not match dims");
  std::copy(v.data(), v.data() + v.size(), h.data().begin());
  return h;
}

std::size_t latent_dim(double kappa, std::size_t n_sc, std::size_t n_r, std::size_t n_t) {
  if (!(kappa > 0.0 && kappa < 1.0)) throw ValidationError("compression ratio must lie in (0, 1)");
  const double slots = (1.0 - kappa) * static_cast<double>(n_sc);
  const double nearest = std::round(slots);
  const double ceiled = std::abs(slots - nearest) < 1e-9 ? nearest : std::ceil(slots);
  return 2 * n_r * n_t * static_cast<std::size_t>(ceiled);
}

std::uint64_t overhead_bits(std::uint64_t bits_per_element, std::uint64_t d_real, std::uint64_t kappa_count) {
  if (bits_per_element == 0 || d_real == 0 || kappa_count == 0)
    throw ValidationError("overhead inputs must be positive");
  const std::uint64_t index_bits = kappa_count <= 1 ? 0 : std::bit_width(kappa_count - 1);
  return bits_per_element * d_real + index_bits;
}

// ---------------------------------------------------------------------------
// Normalization and quantization

NormStats fit_norm_stats(const RMatrix& samples) {
  if (samples.size() == 0) throw ValidationError("cannot fit normalization on no data");
  NormStats s{samples.minCoeff(), samples.maxCoeff()};
  if (!(s.max > s.min)) {
    s.min -= 0.5;
    s.max += 0.5;
  }
  return s;
}

namespace {

void check_stats(const NormStats& s) {
  if (!(s.max > s.min) || !std::isfinite(s.min) || !std::isfinite(s.max))
    throw ValidationError("degenerate normalization statistics");
}

}  // namespace

RVector normalize(const RVector& v, const NormStats& stats) {
  check_stats(stats);
  return ((v.array() - stats.min) / (stats.max - stats.min)).cwiseMax(0.0).cwiseMin(1.0).matrix();
}

RMatrix normalize(const RMatrix& m, const NormStats& stats) {
  check_stats(stats);
  return ((m.array() - stats.min) / (stats.max - stats.min)).cwiseMax(0.0).cwiseMin(1.0).matrix();
}

RVector denormalize(const RVector& v, const NormStats& stats) {
  check_stats(stats);
  return (v.array() * (stats.max - stats.min) + stats.min).matrix();
}

double quantize(double x) {
  const double a = std::abs(x);
  double k = std::floor(a * 1e6);
  // Correct the rounding of a * 1e6 so that quantize(quantize(x)) == quantize(x).
  if ((k + 1.0) / 1e6 <= a) k += 1.0;
  else if (k / 1e6 > a) k -= 1.0;
  return std::copysign(k / 1e6, x);
}

RVector quantize(const RVector& v) { return v.unaryExpr([](double x) { return quantize(x); }); }

// ---------------------------------------------------------------------------
// Network

namespace {

void apply_activation(Activation act, RMatrix& z) {
  switch (act) {
    case Activation::Linear: break;
    case Activation::Relu: z = z.cwiseMax(0.0); break;
    case Activation::Sigmoid: z = (1.0 + (-z.array()).exp()).inverse().matrix(); break;
  }
}

RMatrix forward_layer(const DenseLayer& layer, const RMatrix& x) {
  RMatrix z = layer.weight * x;
  z.colwise() += layer.bias;
  apply_activation(layer.activation, z);
  return z;
}

DenseLayer make_layer(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  DenseLayer l;
  l.weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  l.bias = RVector::Zero(static_cast<Eigen::Index>(out));
  l.activation = act;
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  // Column-major fill so the draw order is independent of Eigen internals.
  for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) l.weight(r, c) = bound * (2.0 * uniform01(rng) - 1.0);
  return l;
}

}  // namespace

AutoencoderModel AutoencoderModel::build(const Architecture& arch, std::uint64_t seed) {
  if (arch.input_dim == 0 || arch.latent_dim == 0) throw ValidationError("architecture dims must be positive");
  Rng rng(seed);
  AutoencoderModel m;
  std::size_t prev = arch.input_dim;
  for (auto w : arch.encoder_widths) {
    m.layers_.push_back(make_layer(prev, w, Activation::Relu, rng));
    prev = w;
  }
  m.layers_.push_back(make_layer(prev, arch.latent_dim, Activation::Linear, rng));
  m.encoder_depth_ = m.layers_.size();
  prev = arch.latent_dim;
  for (auto w : arch.decoder_widths) {
    m.layers_.push_back(make_layer(prev, w, Activation::Relu, rng));
    prev = w;
  }
  m.layers_.push_back(make_layer(prev, arch.input_dim, Activation::Sigmoid, rng));
  return m;
}

AutoencoderModel ae_init(double kappa, const CodecDims& dims, std::uint64_t seed) {
  Architecture arch;
  arch.input_dim = dims.input_dim();
  arch.latent_dim = latent_dim(kappa, dims);
  AutoencoderModel m = AutoencoderModel::build(arch, seed);
  m.kappa_ = kappa;
  m.dims_ = dims;
  return m;
}

std::size_t AutoencoderModel::input_dim() const {
  if (layers_.empty()) throw ValidationError("model has no layers");
  return layers_.front().in();
}

std::size_t AutoencoderModel::latent_dim() const {
  if (layers_.empty()) throw ValidationError("model has no layers");
  return layers_[encoder_depth_ - 1].out();
}

std::size_t AutoencoderModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool AutoencoderModel::all_finite() const {
  return std::all_of(layers_.begin(), layers_.end(),
                     [](const DenseLayer& l) { return l.weight.allFinite() && l.bias.allFinite(); });
}

RMatrix ae_encode(const AutoencoderModel& model, const RMatrix& x) {
  if (static_cast<std::size_t>(x.rows()) != model.input_dim()) throw ValidationError("encoder input length mismatch");
  RMatrix a = x;
  for (std::size_t i = 0; i < model.encoder_depth(); ++i) a = forward_layer(model.layers()[i], a);
  return a;
}

RMatrix ae_decode(const AutoencoderModel& model, const RMatrix& latent) {
  if (static_cast<std::size_t>(latent.rows()) != model.latent_dim())
    throw ValidationError("decoder input length mismatch");
  RMatrix a = latent;
  for (std::size_t i = model.encoder_depth(); i < model.layers().size(); ++i) a = forward_layer(model.layers()[i], a);
  return a;
}

RVector ae_encode(const AutoencoderModel& model, const RVector& x) { return ae_encode(model, RMatrix(x)).col(0); }
RVector ae_decode(const AutoencoderModel& model, const RVector& latent) {
  return ae_decode(model, RMatrix(latent)).col(0);
}

double mse_loss(const RVector& h, const RVector& h_recon) {
  if (h.size() != h_recon.size()) throw ValidationError("loss inputs differ in length");
  if (h.size() == 0 || h.size() % 2 != 0) throw ValidationError("loss inputs must be non-empty realified vectors");
  return (h - h_recon).squaredNorm() / static_cast<double>(h.size() / 2);
}

double mse_loss(const RMatrix& h, const RMatrix& h_recon) {
  if (h.rows() != h_recon.rows() || h.cols() != h_recon.cols()) throw ValidationError("loss inputs differ in shape");
  if (h.cols() == 0 || h.rows() % 2 != 0) throw ValidationError("loss inputs must be non-empty realified vectors");
  return (h - h_recon).squaredNorm() / static_cast<double>(h.rows() / 2) / static_cast<double>(h.cols());
}

// ---------------------------------------------------------------------------
// Training

Gradients backprop(const AutoencoderModel& model, const RMatrix& batch) { return backprop(model, batch, batch); }

namespace {

// Buffers reused across batches so the training loop does not map and unmap
// large temporaries on every step.
struct Workspace {
  std::vector<RMatrix> acts;  // acts[i] is the output of layer i
  RMatrix delta;
  RMatrix delta_prev;
};

void forward_into(const DenseLayer& layer, const RMatrix& x, RMatrix& out) {
  out.resize(layer.weight.rows(), x.cols());
  out.noalias() = layer.weight * x;
  out.colwise() += layer.bias;
  switch (layer.activation) {
    case Activation::Linear: break;
    case Activation::Relu: out = out.cwiseMax(0.0); break;
    case Activation::Sigmoid: out = (1.0 + (-out.array()).exp()).inverse().matrix(); break;
  }
}

const RMatrix& forward_all(const AutoencoderModel& model, const RMatrix& x, Workspace& ws) {
  const auto& layers = model.layers();
  ws.acts.resize(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) forward_into(layers[i], i == 0 ? x : ws.acts[i - 1], ws.acts[i]);
  return ws.acts.back();
}

void backprop_into(const AutoencoderModel& model, const RMatrix& batch, const RMatrix& target, Workspace& ws,
                   Gradients& g) {
  const auto& layers = model.layers();
  const std::size_t n_layers = layers.size();
  const RMatrix& y = forward_all(model, batch, ws);

  const double complex_count = static_cast<double>(batch.rows() / 2);
  const double n_batch = static_cast<double>(batch.cols());
  g.loss = (y - target).squaredNorm() / complex_count / n_batch;
  g.layers.resize(n_layers);

  ws.delta.resize(y.rows(), y.cols());
  ws.delta.noalias() = (2.0 / (complex_count * n_batch)) * (y - target);
  for (std::size_t i = n_layers; i-- > 0;) {
    const auto& l = layers[i];
    const RMatrix& out = ws.acts[i];
    const RMatrix& in = i == 0 ? batch : ws.acts[i - 1];
    switch (l.activation) {
      case Activation::Linear: break;
      case Activation::Relu: ws.delta = (out.array() > 0.0).select(ws.delta, 0.0); break;
      case Activation::Sigmoid: ws.delta.array() *= out.array() * (1.0 - out.array()); break;
    }
    g.layers[i].weight.resize(l.weight.rows(), l.weight.cols());
    g.layers[i].weight.noalias() = ws.delta * in.transpose();
    g.layers[i].bias = ws.delta.rowwise().sum();
    if (i > 0) {
      ws.delta_prev.resize(l.weight.cols(), ws.delta.cols());
      ws.delta_prev.noalias() = l.weight.transpose() * ws.delta;
      ws.delta.swap(ws.delta_prev);
    }
  }
}

}  // namespace

Gradients backprop(const AutoencoderModel& model, const RMatrix& batch, const RMatrix& target) {
  if (batch.cols() == 0) throw ValidationError("empty batch");
  if (static_cast<std::size_t>(batch.rows()) != model.input_dim()) throw ValidationError("batch width mismatch");
  if (target.rows() != batch.rows() || target.cols() != batch.cols()) throw ValidationError("target shape mismatch");
  Workspace ws;
  Gradients g;
  backprop_into(model, batch, target, ws, g);
  return g;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamParams& hp) {
  if (params.size() != grads.size()) throw ValidationError("parameter and gradient sizes differ");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw ValidationError("optimizer state does not match parameters");
  for (double g : grads)
    if (!std::isfinite(g)) throw TrainingError("non-finite gradient");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hp.beta1, t);
  const double c2 = 1.0 - std::pow(hp.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * grads[i];
    state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= hp.lr * m_hat / (std::sqrt(v_hat) + hp.eps);
  }
}

RMatrix make_codec_dataset(std::span<const ChannelTensor> tensors) {
  if (tensors.empty()) return {};
  const auto rows = static_cast<Eigen::Index>(2 * tensors.front().size());
  RMatrix out(rows, static_cast<Eigen::Index>(tensors.size()));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (static_cast<Eigen::Index>(2 * tensors[i].size()) != rows) throw ValidationError("dataset tensors differ in size");
    out.col(static_cast<Eigen::Index>(i)) = realify(vectorize_csi(tensors[i]));
  }
  return out;
}

namespace {

void gather_into(const RMatrix& data, std::span<const std::size_t> idx, RMatrix& out) {
  out.resize(data.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = data.col(static_cast<Eigen::Index>(idx[i]));
}

RMatrix gather(const RMatrix& data, std::span<const std::size_t> idx) {
  RMatrix out;
  gather_into(data, idx, out);
  return out;
}

double evaluate_loss(const AutoencoderModel& model, const RMatrix& data, std::span<const std::size_t> idx,
                     Workspace& ws, RMatrix& x) {
  constexpr std::size_t kChunk = 256;
  double total = 0.0;
  for (std::size_t start = 0; start < idx.size(); start += kChunk) {
    const auto part = idx.subspan(start, std::min(kChunk, idx.size() - start));
    gather_into(data, part, x);
    total += mse_loss(x, forward_all(model, x, ws)) * static_cast<double>(part.size());
  }
  return total / static_cast<double>(idx.size());
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

}  // namespace

TrainHistory train(AutoencoderModel& model, RMatrix dataset, const TrainOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  const auto n = static_cast<std::size_t>(dataset.cols());
  if (n == 0) throw TrainingError("empty training dataset");
  if (static_cast<std::size_t>(dataset.rows()) != model.input_dim()) throw ValidationError("dataset width mismatch");
  if (opts.batch == 0) throw ValidationError("batch size must be positive");
  if (!(opts.val_fraction >= 0.0 && opts.val_fraction < 1.0)) throw ValidationError("val_fraction must be in [0, 1)");

  Rng rng(opts.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);

  std::size_t n_val = static_cast<std::size_t>(std::llround(opts.val_fraction * static_cast<double>(n)));
  n_val = std::min(n_val, n - 1);
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  {
    const RMatrix train_cols = gather(dataset, train_idx);
    model.set_norm(fit_norm_stats(train_cols));
  }
  const NormStats& ns = model.norm();
  dataset = normalize(dataset, ns);

  auto& layers = model.layers();
  std::vector<AdamState> w_state(layers.size()), b_state(layers.size());
  const AdamParams hp{opts.lr, 0.9, 0.999, 1e-8};

  TrainHistory hist;
  Workspace ws;
  Gradients g;
  RMatrix x;
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    shuffle(train_idx, rng);
    double epoch_loss = 0.0;
    for (std::size_t s = 0; s < train_idx.size(); s += opts.batch) {
      const auto part = std::span<const std::size_t>(train_idx).subspan(s, std::min(opts.batch, train_idx.size() - s));
      gather_into(dataset, part, x);
      backprop_into(model, x, x, ws, g);
      epoch_loss += g.loss * static_cast<double>(part.size());
      for (std::size_t i = 0; i < layers.size(); ++i) {
        adam_step({layers[i].weight.data(), static_cast<std::size_t>(layers[i].weight.size())},
                  {g.layers[i].weight.data(), static_cast<std::size_t>(g.layers[i].weight.size())}, w_state[i], hp);
        adam_step({layers[i].bias.data(), static_cast<std::size_t>(layers[i].bias.size())},
                  {g.layers[i].bias.data(), static_cast<std::size_t>(g.layers[i].bias.size())}, b_state[i], hp);
      }
    }
    hist.train_loss.push_back(epoch_loss / static_cast<double>(train_idx.size()));
    hist.val_loss.push_back(val_idx.empty() ? hist.train_loss.back() : evaluate_loss(model, dataset, val_idx, ws, x));
  }
  hist.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return hist;
}

// ---------------------------------------------------------------------------
// Compressed CSI

namespace {

double narrow(double v, std::uint8_t bits) {
  if (bits == 32) return static_cast<double>(static_cast<float>(v));
  if (bits == 64) return v;
  throw ValidationError("bits per element must be 32 or 64");
}

void check_model_dims(const AutoencoderModel& model, const CodecDims& dims) {
  if (model.dims() != dims) throw ValidationError("model dimensions do not match the channel");
}

}  // namespace

LatentCsi compress(const AutoencoderModel& model, const ChannelTensor& h, std::uint8_t kappa_index,
                   std::uint8_t bits_per_element) {
  const CodecDims dims{h.n_sc(), h.n_r(), h.n_t()};
  check_model_dims(model, dims);
  if (!h.all_finite()) throw ValidationError("channel is not finite");
  const RVector x = normalize(realify(vectorize_csi(h)), model.norm());
  const RVector z = quantize(ae_encode(model, x));
  LatentCsi out;
  out.values.resize(static_cast<std::size_t>(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) out.values[static_cast<std::size_t>(i)] = narrow(z[i], bits_per_element);
  out.kappa_index = kappa_index;
  out.bits_per_element = bits_per_element;
  out.dims = dims;
  return out;
}

ChannelTensor decompress(const AutoencoderModel& model, const LatentCsi& latent) {
  check_model_dims(model, latent.dims);
  if (latent.values.size() != model.latent_dim()) throw ValidationError("latent length does not match the model");
  const RVector z = Eigen::Map<const RVector>(latent.values.data(), static_cast<Eigen::Index>(latent.values.size()));
  const RVector y = denormalize(ae_decode(model, z), model.norm());
  return devectorize_csi(complexify(y), latent.dims.n_sc, latent.dims.n_r, latent.dims.n_t);
}

std::size_t CodecBank::index_of(double kappa) const {
  for (std::size_t i = 0; i < models_.size(); ++i)
    if (std::abs(models_[i].kappa() - kappa) < 1e-12) return i;
  throw ValidationError("no model for the requested compression ratio");
}

LatentCsi CodecBank::compress(std::size_t kappa_index, const ChannelTensor& h, std::uint8_t bits_per_element) const {
  if (kappa_index >= models_.size() || kappa_index > 255) throw ValidationError("compression ratio index out of range");
  return csifb::compress(models_[kappa_index], h, static_cast<std::uint8_t>(kappa_index), bits_per_element);
}

ChannelTensor CodecBank::decompress(const LatentCsi& latent) const {
  if (latent.kappa_index >= models_.size()) throw ValidationError("latent refers to an unknown compression ratio");
  const auto& model = models_[latent.kappa_index];
  if (latent.values.size() != model.latent_dim())
    throw ValidationError("latent length does not match the model for its compression ratio index");
  return csifb::decompress(model, latent);
}

std::uint64_t CodecBank::overhead_bits(std::size_t kappa_index, std::uint8_t bits_per_element) const {
  return csifb::overhead_bits(bits_per_element, models_.at(kappa_index).latent_dim(), models_.size());
}

// ---------------------------------------------------------------------------
// Wire format

namespace {

constexpr std::uint8_t kWireMagic[4] = {'C', 'S', 'I', 'C'};
constexpr std::uint8_t kModelMagic[4] = {'C', 'S', 'I', 'M'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw FormatError("truncated input");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(in[pos + i]) << (8 * i));
  pos += sizeof(T);
  return v;
}

std::uint32_t to_u32(std::size_t v) {
  if (v > 0xFFFFFFFFULL) throw FormatError("dimension does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::vector<std::uint8_t> serialize(const LatentCsi& latent) {
  if (latent.bits_per_element != 32 && latent.bits_per_element != 64)
    throw FormatError("bits per element must be 32 or 64");
  std::vector<std::uint8_t> out(std::begin(kWireMagic), std::end(kWireMagic));
  out.reserve(kWireHeaderBytes + latent.values.size() * latent.bits_per_element / 8);
  out.push_back(kWireVersion);
  out.push_back(latent.kappa_index);
  out.push_back(latent.bits_per_element);
  put_le(out, to_u32(latent.dims.n_sc));
  put_le(out, to_u32(latent.dims.n_r));
  put_le(out, to_u32(latent.dims.n_t));
  put_le(out, to_u32(latent.values.size()));
  for (double v : latent.values) {
    if (latent.bits_per_element == 32) {
      const float f = static_cast<float>(v);
      if (static_cast<double>(f) != v && std::isfinite(v)) throw FormatError("value not representable in 32 bits");
      put_le(out, std::bit_cast<std::uint32_t>(f));
    } else {
      put_le(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  return out;
}

LatentCsi deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kWireHeaderBytes) throw FormatError("truncated header");
  if (!std::equal(std::begin(kWireMagic), std::end(kWireMagic), bytes.begin())) throw FormatError("bad magic");
  std::size_t pos = 4;
  if (bytes[pos++] != kWireVersion) throw FormatError("unsupported version");
  LatentCsi out;
  out.kappa_index = bytes[pos++];
  out.bits_per_element = bytes[pos++];
  if (out.bits_per_element != 32 && out.bits_per_element != 64) throw FormatError("unsupported element width");
  out.dims.n_sc = get_le<std::uint32_t>(bytes, pos);
  out.dims.n_r = get_le<std::uint32_t>(bytes, pos);
  out.dims.n_t = get_le<std::uint32_t>(bytes, pos);
  const std::size_t d = get_le<std::uint32_t>(bytes, pos);
  const std::size_t width = out.bits_per_element / 8;
  if (bytes.size() != kWireHeaderBytes + d * width) throw FormatError("payload length does not match D");
  out.values.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    if (width == 4)
      out.values[i] = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(bytes, pos)));
    else
      out.values[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes, pos));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model persistence

void save_model(const AutoencoderModel& model, std::ostream& out) {
  std::vector<std::uint8_t> buf(std::begin(kModelMagic), std::end(kModelMagic));
  buf.push_back(1);
  put_le(buf, std::bit_cast<std::uint64_t>(model.kappa()));
  put_le(buf, to_u32(model.dims().n_sc));
  put_le(buf, to_u32(model.dims().n_r));
  put_le(buf, to_u32(model.dims().n_t));
  put_le(buf, to_u32(model.encoder_depth()));
  put_le(buf, to_u32(model.layers().size()));
  for (const auto& l : model.layers()) {
    put_le(buf, to_u32(l.out()));
    put_le(buf, to_u32(l.in()));
    buf.push_back(static_cast<std::uint8_t>(l.activation));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) put_le(buf, std::bit_cast<std::uint64_t>(l.weight(r, c)));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) put_le(buf, std::bit_cast<std::uint64_t>(l.bias[r]));
  }
  put_le(buf, std::bit_cast<std::uint64_t>(model.norm().min));
  put_le(buf, std::bit_cast<std::uint64_t>(model.norm().max));
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw FormatError("failed to write model");
}

AutoencoderModel load_model(std::istream& in) {
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::span<const std::uint8_t> s(bytes);
  if (s.size() < 5 || !std::equal(std::begin(kModelMagic), std::end(kModelMagic), s.begin()))
    throw FormatError("bad model magic");
  std::size_t pos = 4;
  if (s[pos++] != 1) throw FormatError("unsupported model version");

  AutoencoderModel m;
  m.kappa_ = std::bit_cast<double>(get_le<std::uint64_t>(s, pos));
  m.dims_.n_sc = get_le<std::uint32_t>(s, pos);
  m.dims_.n_r = get_le<std::uint32_t>(s, pos);
  m.dims_.n_t = get_le<std::uint32_t>(s, pos);
  m.encoder_depth_ = get_le<std::uint32_t>(s, pos);
  const std::size_t n_layers = get_le<std::uint32_t>(s, pos);
  if (m.encoder_depth_ == 0 || m.encoder_depth_ >= n_layers) throw FormatError("inconsistent layer counts");
  for (std::size_t i = 0; i < n_layers; ++i) {
    DenseLayer l;
    const auto out = static_cast<Eigen::Index>(get_le<std::uint32_t>(s, pos));
    const auto inn = static_cast<Eigen::Index>(get_le<std::uint32_t>(s, pos));
    if (pos >= s.size()) throw FormatError("truncated model");
    const std::uint8_t act = s[pos++];
    if (act > 2) throw FormatError("unknown activation");
    l.activation = static_cast<Activation>(act);
    if (s.size() - pos < static_cast<std::size_t>(out * (inn + 1)) * 8) throw FormatError("truncated model");
    l.weight.resize(out, inn);
    l.bias.resize(out);
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < inn; ++c) l.weight(r, c) = std::bit_cast<double>(get_le<std::uint64_t>(s, pos));
    for (Eigen::Index r = 0; r < out; ++r) l.bias[r] = std::bit_cast<double>(get_le<std::uint64_t>(s, pos));
    if (!m.layers_.empty() && m.layers_.back().out() != l.in()) throw FormatError("layer shapes do not chain");
    m.layers_.push_back(std::move(l));
  }
  m.norm_.min = std::bit_cast<double>(get_le<std::uint64_t>(s, pos));
  m.norm_.max = std::bit_cast<double>(get_le<std::uint64_t>(s, pos));
  if (pos != s.size()) throw FormatError("trailing bytes after model");
  return m;
}

void save_model(const AutoencoderModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  save_model(model, out);
}

AutoencoderModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return load_model(in);
}

}  // namespace csifb
