#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "csifb/chanmodel.hpp"
#include "csifb/types.hpp"

namespace csifb {

// ---------------------------------------------------------------------------
// Complex-aware vectorization

// [Re(x); Im(x)]
RVector realify(const CVector& x);
CVector complexify(const RVector& v);

// Subcarrier-major, then rx, then tx: (k, r, t) -> k*N_r*N_t + r*N_t + t.
CVector vectorize_csi(const ChannelTensor& h);
ChannelTensor devectorize_csi(const CVector& v, std::size_t n_sc, std::size_t n_r, std::size_t n_t);

struct CodecDims {
  std::size_t n_sc = 128;
  std::size_t n_r = 4;
  std::size_t n_t = 16;

  std::size_t complex_count() const noexcept { return n_sc * n_r * n_t; }
  std::size_t input_dim() const noexcept { return 2 * complex_count(); }
  friend bool operator==(const CodecDims&, const CodecDims&) = default;
};

// 2 * n_r * n_t * ceil((1 - kappa) * n_sc)
std::size_t latent_dim(double kappa, std::size_t n_sc, std::size_t n_r, std::size_t n_t);
inline std::size_t latent_dim(double kappa, const CodecDims& d) { return latent_dim(kappa, d.n_sc, d.n_r, d.n_t); }

// Feedback cost of one report: b * D + ceil(log2 |K|).
std::uint64_t overhead_bits(std::uint64_t bits_per_element, std::uint64_t d_real, std::uint64_t kappa_count);

// ---------------------------------------------------------------------------
// Normalization and quantization

struct NormStats {
  double min = 0.0;
  double max = 1.0;
};

NormStats fit_norm_stats(const RMatrix& samples);
// (v - min) / (max - min), clipped to [0, 1].
RVector normalize(const RVector& v, const NormStats& stats);
RVector denormalize(const RVector& v, const NormStats& stats);
// Column-wise normalize of a sample matrix.
RMatrix normalize(const RMatrix& m, const NormStats& stats);

// Truncation toward zero after the sixth decimal.
double quantize(double x);
RVector quantize(const RVector& v);

// ---------------------------------------------------------------------------
// Network

enum class Activation : std::uint8_t { Linear = 0, Relu = 1, Sigmoid = 2 };

struct DenseLayer {
  RMatrix weight;  // out x in
  RVector bias;    // out
  Activation activation = Activation::Linear;

  std::size_t in() const noexcept { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out() const noexcept { return static_cast<std::size_t>(weight.rows()); }
};

struct Architecture {
  std::size_t input_dim = 0;
  std::vector<std::size_t> encoder_widths{10, 10};
  std::size_t latent_dim = 0;
  std::vector<std::size_t> decoder_widths{10};
};

class AutoencoderModel {
 public:
  AutoencoderModel() = default;

  // Dense stack from the architecture; weights ~ U(+-sqrt(6 / (fan_in + fan_out))), biases zero.
  static AutoencoderModel build(const Architecture& arch, std::uint64_t seed);

  double kappa() const noexcept { return kappa_; }
  const CodecDims& dims() const noexcept { return dims_; }
  std::size_t input_dim() const;
  std::size_t latent_dim() const;
  std::size_t encoder_depth() const noexcept { return encoder_depth_; }

  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  const NormStats& norm() const noexcept { return norm_; }
  void set_norm(const NormStats& n) { norm_ = n; }

  std::size_t parameter_count() const;
  bool all_finite() const;

  friend AutoencoderModel ae_init(double kappa, const CodecDims& dims, std::uint64_t seed);
  friend AutoencoderModel load_model(std::istream& in);

 private:
  double kappa_ = 0.0;
  CodecDims dims_{};
  std::size_t encoder_depth_ = 0;  // layers up to and including the latent projection
  std::vector<DenseLayer> layers_;
  NormStats norm_{};
};

// input 2*N_sc*N_r*N_t -> 10 (ReLU) -> 10 (ReLU) -> D (linear) -> 10 (ReLU) -> 2*N_sc*N_r*N_t (sigmoid)
AutoencoderModel ae_init(double kappa, const CodecDims& dims, std::uint64_t seed);

// Column-per-sample batch forward passes on normalized inputs.
RMatrix ae_encode(const AutoencoderModel& model, const RMatrix& x);
RMatrix ae_decode(const AutoencoderModel& model, const RMatrix& latent);
RVector ae_encode(const AutoencoderModel& model, const RVector& x);
RVector ae_decode(const AutoencoderModel& model, const RVector& latent);

// Sum of squared complex differences over the complex element count. The
// inputs are realified ([Re; Im]) vectors.
double mse_loss(const RVector& h, const RVector& h_recon);
// Mean of the per-column loss.
double mse_loss(const RMatrix& h, const RMatrix& h_recon);

// ---------------------------------------------------------------------------
// Training

struct LayerGrad {
  RMatrix weight;
  RVector bias;
};

struct Gradients {
  std::vector<LayerGrad> layers;
  double loss = 0.0;
};

// Analytic gradient of the mean batch loss (target = input). ReLU'(0) = 0.
Gradients backprop(const AutoencoderModel& model, const RMatrix& batch);
// Same, with an explicit target.
Gradients backprop(const AutoencoderModel& model, const RMatrix& batch, const RMatrix& target);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

struct AdamParams {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam. `state.step` counts completed updates of this slot.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamParams& hp);

struct TrainOptions {
  std::size_t epochs = 64;
  std::size_t batch = 128;
  double lr = 1e-4;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  double seconds = 0.0;
};

// Stacks realified, vectorized tensors as columns.
RMatrix make_codec_dataset(std::span<const ChannelTensor> tensors);

// Fits normalization statistics on the training split, then runs shuffled
// mini-batch Adam on the normalized columns of `dataset`.
TrainHistory train(AutoencoderModel& model, RMatrix dataset, const TrainOptions& opts);

// ---------------------------------------------------------------------------
// Compressed CSI

struct LatentCsi {
  std::vector<double> values;
  std::uint8_t kappa_index = 0;
  std::uint8_t bits_per_element = 32;
  CodecDims dims{};

  friend bool operator==(const LatentCsi&, const LatentCsi&) = default;
};

// quantize(ae_encode(normalize(realify(vectorize(h))))), narrowed to the wire precision.
LatentCsi compress(const AutoencoderModel& model, const ChannelTensor& h, std::uint8_t kappa_index = 0,
                   std::uint8_t bits_per_element = 32);
// devectorize(complexify(denormalize(ae_decode(latent))))
ChannelTensor decompress(const AutoencoderModel& model, const LatentCsi& latent);

// |K| trained models indexed by kappa index; routes a latent to its decoder.
class CodecBank {
 public:
  void add(AutoencoderModel model) { models_.push_back(std::move(model)); }
  std::size_t size() const noexcept { return models_.size(); }
  const AutoencoderModel& at(std::size_t i) const { return models_.at(i); }
  std::size_t index_of(double kappa) const;

  LatentCsi compress(std::size_t kappa_index, const ChannelTensor& h, std::uint8_t bits_per_element = 32) const;
  ChannelTensor decompress(const LatentCsi& latent) const;
  std::uint64_t overhead_bits(std::size_t kappa_index, std::uint8_t bits_per_element = 32) const;

 private:
  std::vector<AutoencoderModel> models_;
};

// Wire format: "CSIC", version 0x01, kappa index, b, N_sc, N_r, N_t, D as
// little-endian uint32, then D little-endian IEEE-754 values of b bits.
inline constexpr std::uint8_t kWireVersion = 0x01;
inline constexpr std::size_t kWireHeaderBytes = 4 + 1 + 1 + 1 + 4 * 4;

std::vector<std::uint8_t> serialize(const LatentCsi& latent);
LatentCsi deserialize(std::span<const std::uint8_t> bytes);

// Model persistence: "CSIM" v1, kappa, dims, layers (shape, activation,
// row-major weights, bias) as little-endian doubles, then norm stats.
void save_model(const AutoencoderModel& model, std::ostream& out);
AutoencoderModel load_model(std::istream& in);
void save_model(const AutoencoderModel& model, const std::filesystem::path& path);
AutoencoderModel load_model(const std::filesystem::path& path);

}  // namespace csifb
