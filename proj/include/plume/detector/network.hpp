#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "plume/common.hpp"

namespace plume {

/// Channel-major (C, H, W) activation.
struct Tensor {
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_, double fill = 0.0) : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, fill) {}

  double& at(int ch, int y, int x) { return v[(static_cast<size_t>(ch) * h + y) * w + x]; }
  double at(int ch, int y, int x) const { return v[(static_cast<size_t>(ch) * h + y) * w + x]; }
  double* plane(int ch) { return v.data() + static_cast<size_t>(ch) * h * w; }
  const double* plane(int ch) const { return v.data() + static_cast<size_t>(ch) * h * w; }

  static Tensor from_grid(const Grid<double>& g);
};

/// 2-D convolution, stride 1, zero padding `pad`. Weights are (cout, cin, k, k).
struct ConvLayer {
  int cin = 0;
  int cout = 0;
  int k = 3;
  int pad = 0;
  size_t w_off = 0;
  size_t b_off = 0;

  size_t param_count() const { return static_cast<size_t>(cout) * cin * k * k + cout; }
};

void conv_forward(const ConvLayer& layer, const double* params, const Tensor& in, Tensor& out);
/// Accumulates into `grads`; `din` may be null when the input gradient is not needed.
void conv_backward(const ConvLayer& layer, const double* params, const Tensor& in, const Tensor& dout, double* grads,
                   Tensor* din);

void relu_inplace(Tensor& t);
void relu_backward(const Tensor& activated, Tensor& grad);

/// 2x2 max pool, stride 2, floor semantics. `argmax` records the winning flat input index.
void maxpool_forward(const Tensor& in, Tensor& out, std::vector<int>& argmax);
void maxpool_backward(const Tensor& in, const std::vector<int>& argmax, const Tensor& dout, Tensor& din);

void upsample_forward(const Tensor& in, Tensor& out);
void upsample_backward(const Tensor& dout, Tensor& din);

enum class DetectorMode { Tilewise, Pixelwise, Multitask };

std::string to_string(DetectorMode m);
DetectorMode detector_mode_from_string(const std::string& s);

struct ModelSpec {
  DetectorMode mode = DetectorMode::Multitask;
  int tile_size = 32;  // D
  int blocks = 2;      // stride-2 poolings; F = 2^blocks
  int channels = 4;
  int kernel = 3;
  uint64_t seed = 0;

  int downsample_factor() const { return 1 << blocks; }
  void validate() const;
};

/// Intermediate activations kept for backpropagation.
struct ForwardCache {
  std::vector<Tensor> tensors;
  std::vector<std::vector<int>> argmax;
  Tensor output;  // plume probabilities, 1 x H' x W'

  /// ReLU sign pattern and pooling winners; equal signatures mean the network is smooth
  /// between the two evaluations.
  std::vector<int64_t> signature() const;
};

/// Small convolutional detector.
///
/// Tilewise: {conv k x k (valid) -> ReLU -> maxpool 2} x blocks, then a dense head realized as
/// a valid convolution spanning the whole D x D feature footprint, and a 2-class softmax. On
/// a larger input the same code yields the fully-convolutional coarse map, one cell per F px.
///
/// Pixelwise / multitask: encoder-decoder with 'same' 3x3 convolutions, nearest upsampling,
/// skip concatenation and a 1x1 sigmoid head. Input sides must be multiples of F.
class DetectorModel {
 public:
  DetectorModel() = default;
  explicit DetectorModel(const ModelSpec& spec);

  const ModelSpec& spec() const { return spec_; }
  DetectorMode mode() const { return spec_.mode; }
  int downsample_factor() const { return spec_.downsample_factor(); }
  int tile_size() const { return spec_.tile_size; }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  double calibrated_threshold = 0.5;

  /// Runs the network on a (1, H, W) input of scaled values.
  Tensor forward(const Tensor& input, ForwardCache* cache = nullptr) const;
  /// Backpropagates d loss / d output (same shape as cache.output) into `grads`.
  void backward(const ForwardCache& cache, const Tensor& dout, std::vector<double>& grads) const;

  /// Side length of the tilewise feature map entering the head for a D x D tile.
  int head_extent() const { return head_extent_; }

  /// Rounds parameters to float32, the on-disk precision.
  void round_to_float();

  std::vector<ConvLayer> layers() const { return layers_; }

 private:
  void build();
  Tensor forward_tilewise(const Tensor& input, ForwardCache* cache) const;
  Tensor forward_segmentation(const Tensor& input, ForwardCache* cache) const;
  void backward_tilewise(const ForwardCache& cache, const Tensor& dout, std::vector<double>& grads) const;
  void backward_segmentation(const ForwardCache& cache, const Tensor& dout, std::vector<double>& grads) const;

  ModelSpec spec_;
  std::vector<ConvLayer> layers_;
  std::vector<double> params_;
  int head_extent_ = 0;
};

/// Output of a single-tile forward pass.
struct TilePrediction {
  double probability = 0.0;  // tilewise: plume probability; otherwise max salience
  Grid<double> salience;     // pixelwise / multitask only
};

/// Evaluates one pre-scaled D x D tile.
TilePrediction forward(const DetectorModel& model, const Grid<double>& tile);

/// Clips raw ppm-m into [lo, hi], rescales to [0, 1]; nodata pixels become 0.
Grid<double> prepare_input(const Grid<float>& values, const Mask& nodata, double clip_lo = 0.0, double clip_hi = 4000.0);

/// JSON header `<stem>.json` plus float32 little-endian parameters `<stem>.bin`.
void write_model(const DetectorModel& model, const std::filesystem::path& path);
DetectorModel read_model(const std::filesystem::path& path);

}  // namespace plume
