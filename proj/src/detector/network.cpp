#include "plume/detector/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace plume {

Tensor Tensor::from_grid(const Grid<double>& g) {
  Tensor t(1, g.rows, g.cols);
  std::copy(g.data.begin(), g.data.end(), t.v.begin());
  return t;
}

void conv_forward(const ConvLayer& L, const double* params, const Tensor& in, Tensor& out) {
  if (in.c != L.cin) throw ShapeError("conv: channel mismatch");
  const int oh = in.h + 2 * L.pad - L.k + 1;
  const int ow = in.w + 2 * L.pad - L.k + 1;
  if (oh <= 0 || ow <= 0) throw ShapeError("conv: input smaller than kernel");
  out = Tensor(L.cout, oh, ow);
  const double* W = params + L.w_off;
  const double* B = params + L.b_off;
  for (int co = 0; co < L.cout; ++co) {
    double* dst_plane = out.plane(co);
    std::fill(dst_plane, dst_plane + static_cast<size_t>(oh) * ow, B[co]);
    for (int ci = 0; ci < L.cin; ++ci) {
      const double* src_plane = in.plane(ci);
      for (int ky = 0; ky < L.k; ++ky) {
        const int y_lo = std::max(0, L.pad - ky);
        const int y_hi = std::min(oh, in.h + L.pad - ky);
        for (int kx = 0; kx < L.k; ++kx) {
          const double wv = W[((static_cast<size_t>(co) * L.cin + ci) * L.k + ky) * L.k + kx];
          const int x_lo = std::max(0, L.pad - kx);
          const int x_hi = std::min(ow, in.w + L.pad - kx);
          for (int y = y_lo; y < y_hi; ++y) {
            const double* src = src_plane + static_cast<ptrdiff_t>(y + ky - L.pad) * in.w + (kx - L.pad);
            double* dst = dst_plane + static_cast<size_t>(y) * ow;
            for (int x = x_lo; x < x_hi; ++x) dst[x] += wv * src[x];
          }
        }
      }
    }
  }
}

void conv_backward(const ConvLayer& L, const double* params, const Tensor& in, const Tensor& dout, double* grads,
                   Tensor* din) {
  const int oh = dout.h, ow = dout.w;
  const double* W = params + L.w_off;
  double* dW = grads + L.w_off;
  double* dB = grads + L.b_off;
  if (din) *din = Tensor(in.c, in.h, in.w);
  for (int co = 0; co < L.cout; ++co) {
    const double* g_plane = dout.plane(co);
    double bsum = 0.0;
    for (size_t i = 0; i < static_cast<size_t>(oh) * ow; ++i) bsum += g_plane[i];
    dB[co] += bsum;
    for (int ci = 0; ci < L.cin; ++ci) {
      const double* src_plane = in.plane(ci);
      double* dsrc_plane = din ? din->plane(ci) : nullptr;
      for (int ky = 0; ky < L.k; ++ky) {
        const int y_lo = std::max(0, L.pad - ky);
        const int y_hi = std::min(oh, in.h + L.pad - ky);
        for (int kx = 0; kx < L.k; ++kx) {
          const size_t widx = ((static_cast<size_t>(co) * L.cin + ci) * L.k + ky) * L.k + kx;
          const double wv = W[widx];
          const int x_lo = std::max(0, L.pad - kx);
          const int x_hi = std::min(ow, in.w + L.pad - kx);
          double acc = 0.0;
          for (int y = y_lo; y < y_hi; ++y) {
            const ptrdiff_t off = static_cast<ptrdiff_t>(y + ky - L.pad) * in.w + (kx - L.pad);
            const double* src = src_plane + off;
            const double* g = g_plane + static_cast<size_t>(y) * ow;
            for (int x = x_lo; x < x_hi; ++x) acc += g[x] * src[x];
            if (dsrc_plane) {
              double* dsrc = dsrc_plane + off;
              for (int x = x_lo; x < x_hi; ++x) dsrc[x] += wv * g[x];
            }
          }
          dW[widx] += acc;
        }
      }
    }
  }
}

void relu_inplace(Tensor& t) {
  for (auto& x : t.v) x = x > 0.0 ? x : 0.0;
}

void relu_backward(const Tensor& activated, Tensor& grad) {
  for (size_t i = 0; i < grad.v.size(); ++i)
    if (!(activated.v[i] > 0.0)) grad.v[i] = 0.0;
}

void maxpool_forward(const Tensor& in, Tensor& out, std::vector<int>& argmax) {
  const int oh = in.h / 2, ow = in.w / 2;
  if (oh <= 0 || ow <= 0) throw ShapeError("maxpool: input too small");
  out = Tensor(in.c, oh, ow);
  argmax.assign(out.v.size(), 0);
  size_t o = 0;
  for (int c = 0; c < in.c; ++c) {
    const size_t base = static_cast<size_t>(c) * in.h * in.w;
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j, ++o) {
        const int r0 = 2 * i, c0 = 2 * j;
        int best = static_cast<int>(base) + r0 * in.w + c0;
        double bv = in.v[static_cast<size_t>(best)];
        const int cand[3] = {static_cast<int>(base) + r0 * in.w + c0 + 1, static_cast<int>(base) + (r0 + 1) * in.w + c0,
                             static_cast<int>(base) + (r0 + 1) * in.w + c0 + 1};
        for (int idx : cand) {
          if (in.v[static_cast<size_t>(idx)] > bv) {
            bv = in.v[static_cast<size_t>(idx)];
            best = idx;
          }
        }
        out.v[o] = bv;
        argmax[o] = best;
      }
    }
  }
}

void maxpool_backward(const Tensor& in, const std::vector<int>& argmax, const Tensor& dout, Tensor& din) {
  din = Tensor(in.c, in.h, in.w);
  for (size_t o = 0; o < dout.v.size(); ++o) din.v[static_cast<size_t>(argmax[o])] += dout.v[o];
}

void upsample_forward(const Tensor& in, Tensor& out) {
  out = Tensor(in.c, in.h * 2, in.w * 2);
  for (int c = 0; c < in.c; ++c)
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x) out.at(c, y, x) = in.at(c, y / 2, x / 2);
}

void upsample_backward(const Tensor& dout, Tensor& din) {
  din = Tensor(dout.c, dout.h / 2, dout.w / 2);
  for (int c = 0; c < dout.c; ++c)
    for (int y = 0; y < dout.h; ++y)
      for (int x = 0; x < dout.w; ++x) din.at(c, y / 2, x / 2) += dout.at(c, y, x);
}

std::string to_string(DetectorMode m) {
  switch (m) {
    case DetectorMode::Tilewise:
      return "tilewise";
    case DetectorMode::Pixelwise:
      return "pixelwise";
    case DetectorMode::Multitask:
      return "multitask";
  }
  return "multitask";
}

DetectorMode detector_mode_from_string(const std::string& s) {
  if (s == "tilewise") return DetectorMode::Tilewise;
  if (s == "pixelwise") return DetectorMode::Pixelwise;
  if (s == "multitask") return DetectorMode::Multitask;
  throw FormatError("unknown detector mode: " + s);
}

void ModelSpec::validate() const {
  if (blocks < 0 || blocks > 5) throw Error("model: blocks must be in [0, 5]");
  if (blocks == 0 && mode != DetectorMode::Tilewise) throw Error("model: segmentation needs at least one block");
  if (channels < 1) throw Error("model: channels must be positive");
  if (kernel < 1) throw Error("model: kernel must be positive");
  if (tile_size < 1) throw Error("model: tile size must be positive");
  if (mode == DetectorMode::Tilewise) {
    int s = tile_size;
    for (int b = 0; b < blocks; ++b) {
      s = s - kernel + 1;
      if (s < 2) throw Error("model: tile too small for the tilewise stack");
      s /= 2;
    }
  } else {
    if (kernel % 2 == 0) throw Error("model: segmentation kernel must be odd");
    if (tile_size % downsample_factor() != 0) throw Error("model: tile size must be a multiple of F");
  }
}

DetectorModel::DetectorModel(const ModelSpec& spec) : spec_(spec) {
  spec_.validate();
  build();
  Rng rng(derive_seed(spec_.seed, 0x6d6f64656cull));
  for (const auto& L : layers_) {
    const double fan_in = static_cast<double>(L.cin) * L.k * L.k;
    const double scale = std::sqrt(2.0 / fan_in);
    for (size_t i = 0; i < static_cast<size_t>(L.cout) * L.cin * L.k * L.k; ++i) params_[L.w_off + i] = scale * rng.normal();
  }
}

void DetectorModel::build() {
  layers_.clear();
  size_t off = 0;
  auto add = [&](int cin, int cout, int k, int pad) {
    ConvLayer L{cin, cout, k, pad, off, off + static_cast<size_t>(cout) * cin * k * k};
    off += L.param_count();
    layers_.push_back(L);
  };
  const int C = spec_.channels;
  if (spec_.mode == DetectorMode::Tilewise) {
    int s = spec_.tile_size;
    for (int b = 0; b < spec_.blocks; ++b) {
      add(b == 0 ? 1 : C, C, spec_.kernel, 0);
      s = (s - spec_.kernel + 1) / 2;
    }
    head_extent_ = s;
    add(spec_.blocks == 0 ? 1 : C, 2, s, 0);
  } else {
    const int pad = spec_.kernel / 2;
    for (int l = 0; l < spec_.blocks; ++l) add(l == 0 ? 1 : C, C, spec_.kernel, pad);
    add(C, C, spec_.kernel, pad);  // bottleneck
    for (int l = 0; l < spec_.blocks; ++l) add(2 * C, C, spec_.kernel, pad);
    add(C, 1, 1, 0);
    head_extent_ = 0;
  }
  params_.assign(off, 0.0);
}

void DetectorModel::round_to_float() {
  for (auto& p : params_) p = static_cast<double>(static_cast<float>(p));
}

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

std::vector<int64_t> ForwardCache::signature() const {
  std::vector<int64_t> sig;
  for (const auto& t : tensors)
    for (double x : t.v) sig.push_back(x > 0.0 ? 1 : 0);
  for (const auto& a : argmax) sig.insert(sig.end(), a.begin(), a.end());
  return sig;
}

Tensor DetectorModel::forward(const Tensor& input, ForwardCache* cache) const {
  if (input.c != 1) throw ShapeError("detector input must have one channel");
  if (cache) {
    cache->tensors.clear();
    cache->argmax.clear();
  }
  return spec_.mode == DetectorMode::Tilewise ? forward_tilewise(input, cache) : forward_segmentation(input, cache);
}

Tensor DetectorModel::forward_tilewise(const Tensor& input, ForwardCache* cache) const {
  if (input.h < spec_.tile_size || input.w < spec_.tile_size)
    throw ShapeError("tilewise input smaller than the model tile");
  const double* P = params_.data();
  Tensor x = input;
  if (cache) cache->tensors.push_back(x);
  std::vector<int> am;
  for (int b = 0; b < spec_.blocks; ++b) {
    Tensor a;
    conv_forward(layers_[b], P, x, a);
    relu_inplace(a);
    maxpool_forward(a, x, am);
    if (cache) {
      cache->tensors.push_back(std::move(a));
      cache->tensors.push_back(x);
      cache->argmax.push_back(am);
    }
  }
  Tensor logits;
  conv_forward(layers_.back(), P, x, logits);
  Tensor prob(1, logits.h, logits.w);
  for (int y = 0; y < logits.h; ++y)
    for (int xx = 0; xx < logits.w; ++xx) prob.at(0, y, xx) = sigmoid(logits.at(1, y, xx) - logits.at(0, y, xx));
  if (cache) cache->output = prob;
  return prob;
}

void DetectorModel::backward_tilewise(const ForwardCache& cache, const Tensor& dout, std::vector<double>& grads) const {
  const double* P = params_.data();
  double* G = grads.data();
  const Tensor& p = cache.output;
  Tensor dlogits(2, p.h, p.w);
  for (size_t i = 0; i < p.v.size(); ++i) {
    const double dz = dout.v[i] * p.v[i] * (1.0 - p.v[i]);
    dlogits.v[p.v.size() + i] = dz;  // plume channel
    dlogits.v[i] = -dz;
  }
  const int B = spec_.blocks;
  Tensor dx;
  conv_backward(layers_.back(), P, cache.tensors[2 * B], dlogits, G, &dx);
  for (int b = B - 1; b >= 0; --b) {
    const Tensor& act = cache.tensors[1 + 2 * b];
    Tensor da;
    maxpool_backward(act, cache.argmax[b], dx, da);
    relu_backward(act, da);
    conv_backward(layers_[b], P, cache.tensors[2 * b], da, G, b > 0 ? &dx : nullptr);
  }
}

Tensor DetectorModel::forward_segmentation(const Tensor& input, ForwardCache* cache) const {
  const int F = downsample_factor();
  if (input.h % F != 0 || input.w % F != 0) throw ShapeError("segmentation input sides must be multiples of F");
  const double* P = params_.data();
  const int L = spec_.blocks;
  std::vector<Tensor> skips;
  std::vector<int> am;
  Tensor x = input;
  if (cache) cache->tensors.push_back(x);
  for (int l = 0; l < L; ++l) {
    Tensor e;
    conv_forward(layers_[l], P, x, e);
    relu_inplace(e);
    maxpool_forward(e, x, am);
    if (cache) {
      cache->tensors.push_back(e);
      cache->tensors.push_back(x);
      cache->argmax.push_back(am);
    }
    skips.push_back(std::move(e));
  }
  Tensor bott;
  conv_forward(layers_[L], P, x, bott);
  relu_inplace(bott);
  if (cache) cache->tensors.push_back(bott);
  x = std::move(bott);
  for (int s = 0; s < L; ++s) {
    const int l = L - 1 - s;
    Tensor up;
    upsample_forward(x, up);
    const Tensor& skip = skips[l];
    Tensor cat(up.c + skip.c, up.h, up.w);
    std::copy(up.v.begin(), up.v.end(), cat.v.begin());
    std::copy(skip.v.begin(), skip.v.end(), cat.v.begin() + static_cast<ptrdiff_t>(up.v.size()));
    Tensor d;
    conv_forward(layers_[L + 1 + s], P, cat, d);
    relu_inplace(d);
    if (cache) {
      cache->tensors.push_back(std::move(cat));
      cache->tensors.push_back(d);
    }
    x = std::move(d);
  }
  Tensor logits;
  conv_forward(layers_.back(), P, x, logits);
  Tensor prob(1, logits.h, logits.w);
  for (size_t i = 0; i < logits.v.size(); ++i) prob.v[i] = sigmoid(logits.v[i]);
  if (cache) cache->output = prob;
  return prob;
}

void DetectorModel::backward_segmentation(const ForwardCache& cache, const Tensor& dout,
                                          std::vector<double>& grads) const {
  const double* P = params_.data();
  double* G = grads.data();
  const int L = spec_.blocks;
  const auto& T = cache.tensors;
  const Tensor& p = cache.output;

  Tensor dlogits(1, p.h, p.w);
  for (size_t i = 0; i < p.v.size(); ++i) dlogits.v[i] = dout.v[i] * p.v[i] * (1.0 - p.v[i]);

  // Indices into the cache: input 0, enc_l 1+2l, pooled_l 2+2l, bottleneck 1+2L,
  // cat_s 2+2L+2s, dec_s 3+2L+2s.
  auto enc = [&](int l) -> const Tensor& { return T[static_cast<size_t>(1 + 2 * l)]; };
  auto pooled = [&](int l) -> const Tensor& { return T[static_cast<size_t>(2 + 2 * l)]; };
  const Tensor& bott = T[static_cast<size_t>(1 + 2 * L)];
  auto cat = [&](int s) -> const Tensor& { return T[static_cast<size_t>(2 + 2 * L + 2 * s)]; };
  auto dec = [&](int s) -> const Tensor& { return T[static_cast<size_t>(3 + 2 * L + 2 * s)]; };

  Tensor dx;
  conv_backward(layers_.back(), P, dec(L - 1), dlogits, G, &dx);
  std::vector<Tensor> dskip(static_cast<size_t>(L));
  for (int s = L - 1; s >= 0; --s) {
    const int l = L - 1 - s;
    relu_backward(dec(s), dx);
    Tensor dcat;
    conv_backward(layers_[static_cast<size_t>(L + 1 + s)], P, cat(s), dx, G, &dcat);
    const Tensor& skip = enc(l);
    const size_t up_size = dcat.v.size() - skip.v.size();
    Tensor dup(dcat.c - skip.c, dcat.h, dcat.w);
    std::copy(dcat.v.begin(), dcat.v.begin() + static_cast<ptrdiff_t>(up_size), dup.v.begin());
    dskip[static_cast<size_t>(l)] = Tensor(skip.c, skip.h, skip.w);
    std::copy(dcat.v.begin() + static_cast<ptrdiff_t>(up_size), dcat.v.end(), dskip[static_cast<size_t>(l)].v.begin());
    upsample_backward(dup, dx);
  }
  relu_backward(bott, dx);
  Tensor dpool;
  conv_backward(layers_[static_cast<size_t>(L)], P, pooled(L - 1), dx, G, &dpool);
  for (int l = L - 1; l >= 0; --l) {
    Tensor de;
    maxpool_backward(enc(l), cache.argmax[static_cast<size_t>(l)], dpool, de);
    const Tensor& ds = dskip[static_cast<size_t>(l)];
    for (size_t i = 0; i < de.v.size(); ++i) de.v[i] += ds.v[i];
    relu_backward(enc(l), de);
    const Tensor& in = l == 0 ? T[0] : pooled(l - 1);
    conv_backward(layers_[static_cast<size_t>(l)], P, in, de, G, l > 0 ? &dpool : nullptr);
  }
}

void DetectorModel::backward(const ForwardCache& cache, const Tensor& dout, std::vector<double>& grads) const {
  if (grads.size() != params_.size()) grads.assign(params_.size(), 0.0);
  if (dout.v.size() != cache.output.v.size()) throw ShapeError("backward: gradient shape mismatch");
  if (spec_.mode == DetectorMode::Tilewise)
    backward_tilewise(cache, dout, grads);
  else
    backward_segmentation(cache, dout, grads);
}

TilePrediction forward(const DetectorModel& model, const Grid<double>& tile) {
  const int D = model.tile_size();
  if (model.mode() == DetectorMode::Tilewise && (tile.rows != D || tile.cols != D))
    throw ShapeError("tilewise forward expects a " + std::to_string(D) + "x" + std::to_string(D) + " tile");
  const Tensor out = model.forward(Tensor::from_grid(tile));
  TilePrediction pred;
  if (model.mode() == DetectorMode::Tilewise) {
    pred.probability = out.v.at(0);
    return pred;
  }
  pred.salience = Grid<double>(out.h, out.w);
  std::copy(out.v.begin(), out.v.end(), pred.salience.data.begin());
  pred.probability = *std::max_element(out.v.begin(), out.v.end());
  return pred;
}

Grid<double> prepare_input(const Grid<float>& values, const Mask& nodata, double clip_lo, double clip_hi) {
  if (!(clip_lo < clip_hi)) throw Error("prepare_input: clip range must satisfy lo < hi");
  if (!values.same_shape(nodata)) throw ShapeError("prepare_input: mask shape mismatch");
  Grid<double> out(values.rows, values.cols, 0.0);
  const double span = clip_hi - clip_lo;
  for (size_t i = 0; i < values.size(); ++i) {
    if (nodata.data[i]) continue;
    const double v = std::clamp(static_cast<double>(values.data[i]), clip_lo, clip_hi);
    out.data[i] = std::isnan(v) ? 0.0 : (v - clip_lo) / span;
  }
  return out;
}

namespace {

std::filesystem::path model_stem(const std::filesystem::path& path) {
  auto p = path;
  if (p.extension() == ".json" || p.extension() == ".bin") p.replace_extension();
  return p;
}

}  // namespace

void write_model(const DetectorModel& model, const std::filesystem::path& path) {
  const auto stem = model_stem(path);
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  const ModelSpec& s = model.spec();
  nlohmann::json h;
  h["mode"] = to_string(s.mode);
  h["tile_size"] = s.tile_size;
  h["blocks"] = s.blocks;
  h["channels"] = s.channels;
  h["kernel"] = s.kernel;
  h["seed"] = s.seed;
  h["downsample_factor"] = s.downsample_factor();
  h["threshold"] = model.calibrated_threshold;
  h["param_count"] = model.params().size();
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& L : model.layers()) layers.push_back({{"cin", L.cin}, {"cout", L.cout}, {"k", L.k}, {"pad", L.pad}});
  h["layers"] = layers;
  std::ofstream hout(stem.string() + ".json");
  if (!hout) throw Error("cannot write model header " + stem.string());
  hout << h.dump(2) << "\n";

  std::vector<uint32_t> blob(model.params().size());
  for (size_t i = 0; i < blob.size(); ++i) {
    uint32_t bits = std::bit_cast<uint32_t>(static_cast<float>(model.params()[i]));
    if constexpr (std::endian::native == std::endian::big)
      bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) | ((bits >> 8) & 0xFF00u) | (bits >> 24);
    blob[i] = bits;
  }
  std::ofstream bout(stem.string() + ".bin", std::ios::binary);
  bout.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size() * 4));
}

DetectorModel read_model(const std::filesystem::path& path) {
  const auto stem = model_stem(path);
  std::ifstream hin(stem.string() + ".json");
  if (!hin) throw FormatError("model header not found: " + stem.string() + ".json");
  nlohmann::json h;
  ModelSpec s;
  double threshold = 0.5;
  size_t count = 0;
  try {
    hin >> h;
    s.mode = detector_mode_from_string(h.at("mode").get<std::string>());
    s.tile_size = h.at("tile_size").get<int>();
    s.blocks = h.at("blocks").get<int>();
    s.channels = h.at("channels").get<int>();
    s.kernel = h.at("kernel").get<int>();
    s.seed = h.value("seed", uint64_t{0});
    threshold = h.at("threshold").get<double>();
    count = h.at("param_count").get<size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed model header: " + std::string(e.what()));
  }
  DetectorModel model(s);
  model.calibrated_threshold = threshold;
  if (model.params().size() != count) throw FormatError("model header param_count disagrees with layer specs");
  std::ifstream bin(stem.string() + ".bin", std::ios::binary);
  if (!bin) throw FormatError("model parameters not found: " + stem.string() + ".bin");
  std::vector<uint32_t> blob(count);
  bin.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(count * 4));
  if (static_cast<size_t>(bin.gcount()) != count * 4) throw FormatError("model parameter blob too short");
  for (size_t i = 0; i < count; ++i) {
    uint32_t bits = blob[i];
    if constexpr (std::endian::native == std::endian::big)
      bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) | ((bits >> 8) & 0xFF00u) | (bits >> 24);
    model.params()[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return model;
}

}  // namespace plume
