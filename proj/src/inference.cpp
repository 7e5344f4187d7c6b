#include "plume/inference.hpp"

#include <algorithm>

namespace plume {

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

// Tilewise probabilities for the windows centred on pixels (a + i F, b + j F),
// 0 <= i < n_i, 0 <= j < n_j, from a single fully-convolutional pass.
Grid<double> shifted_pass(const DetectorModel& model, const Grid<double>& scene, int a, int b, int n_i, int n_j) {
  const int F = model.downsample_factor();
  const int D = model.tile_size();
  const int half = D / 2;
  Tensor in(1, (n_i - 1) * F + D, (n_j - 1) * F + D);
  for (int y = 0; y < in.h; ++y) {
    const int r = a + y - half;
    if (r < 0 || r >= scene.rows) continue;
    for (int x = 0; x < in.w; ++x) {
      const int c = b + x - half;
      if (c >= 0 && c < scene.cols) in.at(0, y, x) = scene(r, c);
    }
  }
  const Tensor out = model.forward(in);
  if (out.h != n_i || out.w != n_j) throw ShapeError("shifted pass produced an unexpected grid");
  Grid<double> g(n_i, n_j);
  std::copy(out.v.begin(), out.v.end(), g.data.begin());
  return g;
}

void require_tilewise(const DetectorModel& model, const Grid<double>& scene) {
  if (model.mode() != DetectorMode::Tilewise) throw Error("inference: model is not tilewise");
  if (scene.rows < model.tile_size() || scene.cols < model.tile_size())
    throw ShapeError("inference: scene smaller than the model tile");
}

}  // namespace

Grid<double> coarse_map(const DetectorModel& model, const Grid<double>& scene) {
  require_tilewise(model, scene);
  const int F = model.downsample_factor();
  return shifted_pass(model, scene, 0, 0, scene.rows / F, scene.cols / F);
}

Grid<double> shift_and_stitch(const DetectorModel& model, const Grid<double>& scene, int strip_cells) {
  require_tilewise(model, scene);
  const int F = model.downsample_factor();
  const int N = scene.rows, M = scene.cols;
  Grid<double> out(N, M, 0.0);
  std::vector<std::pair<int, int>> shifts;
  for (int a = 0; a < std::min(F, N); ++a)
    for (int b = 0; b < std::min(F, M); ++b) shifts.emplace_back(a, b);
  parallel_for(shifts.size(), [&](size_t s) {
    const auto [a, b] = shifts[s];
    const int n_i = ceil_div(N - a, F);
    const int n_j = ceil_div(M - b, F);
    const int step = strip_cells > 0 ? strip_cells : n_i;
    for (int i0 = 0; i0 < n_i; i0 += step) {
      const int rows = std::min(step, n_i - i0);
      const Grid<double> g = shifted_pass(model, scene, a + i0 * F, b, rows, n_j);
      // Each (a, b, i, j) addresses a distinct pixel, so concurrent passes never collide.
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < n_j; ++j) out(a + (i0 + i) * F, b + j * F) = g(i, j);
    }
  });
  return out;
}

Grid<double> sliding_window_oracle(const DetectorModel& model, const Grid<double>& scene) {
  if (model.mode() != DetectorMode::Tilewise) throw Error("inference: model is not tilewise");
  const int D = model.tile_size();
  const int half = D / 2;
  Grid<double> out(scene.rows, scene.cols, 0.0);
  parallel_for(static_cast<size_t>(scene.rows), [&](size_t rr) {
    const int r = static_cast<int>(rr);
    Grid<double> window(D, D);
    for (int c = 0; c < scene.cols; ++c) {
      for (int y = 0; y < D; ++y) {
        for (int x = 0; x < D; ++x) {
          const int sr = r - half + y, sc = c - half + x;
          window(y, x) = scene.in_bounds(sr, sc) ? scene(sr, sc) : 0.0;
        }
      }
      out(r, c) = forward(model, window).probability;
    }
  });
  return out;
}

Grid<double> dense_predict(const DetectorModel& model, const Grid<double>& scene) {
  if (model.mode() == DetectorMode::Tilewise) throw Error("dense_predict: model must be pixelwise or multitask");
  const int F = model.downsample_factor();
  Tensor in(1, ceil_div(scene.rows, F) * F, ceil_div(scene.cols, F) * F);
  for (int r = 0; r < scene.rows; ++r)
    for (int c = 0; c < scene.cols; ++c) in.at(0, r, c) = scene(r, c);
  const Tensor out = model.forward(in);
  Grid<double> g(scene.rows, scene.cols);
  for (int r = 0; r < scene.rows; ++r)
    for (int c = 0; c < scene.cols; ++c) g(r, c) = out.at(0, r, c);
  return g;
}

SalienceMap predict_scene(const DetectorModel& model, const Raster& cmf, const InferenceOptions& options,
                          bool use_oracle) {
  const Grid<double> scene = prepare_input(cmf.band(0), cmf.nodata_mask, options.clip_lo, options.clip_hi);
  Grid<double> sal;
  if (model.mode() == DetectorMode::Tilewise)
    sal = use_oracle ? sliding_window_oracle(model, scene) : shift_and_stitch(model, scene, options.strip_cells);
  else
    sal = dense_predict(model, scene);
  SalienceMap map;
  map.raster = cmf.like(1);
  map.raster.band_names = {"salience"};
  for (int r = 0; r < cmf.rows; ++r)
    for (int c = 0; c < cmf.cols; ++c) map.raster.at(r, c) = cmf.masked(r, c) ? 0.0f : static_cast<float>(sal(r, c));
  map.threshold = model.calibrated_threshold;
  map.model_id = to_string(model.mode());
  return map;
}

}  // namespace plume
