#pragma once

#include <string>

#include "plume/detector/network.hpp"
#include "plume/raster.hpp"

namespace plume {

struct SalienceMap {
  Raster raster;  // one band in [0, 1]; masked pixels hold 0
  std::string model_id;
  double threshold = 0.5;
};

struct InferenceOptions {
  double clip_lo = 0.0;
  double clip_hi = 4000.0;
  /// Upper bound on coarse rows evaluated per strip in a shifted pass; 0 means one strip.
  int strip_cells = 0;
};

/// Fully-convolutional pass of a tilewise model over a prepared scene.
/// Cell (i, j) is the tile probability of the D x D window centred on pixel (i F, j F), with
/// zero padding outside the scene. Output is (N / F) x (M / F).
Grid<double> coarse_map(const DetectorModel& model, const Grid<double>& scene);

/// F^2 shifted coarse passes interlaced to N x M. Equal to sliding_window_oracle.
Grid<double> shift_and_stitch(const DetectorModel& model, const Grid<double>& scene, int strip_cells = 0);

/// forward() on the zero-padded D x D window centred on every pixel.
Grid<double> sliding_window_oracle(const DetectorModel& model, const Grid<double>& scene);

/// Single pass of a pixelwise / multitask model over the scene padded to a multiple of F.
Grid<double> dense_predict(const DetectorModel& model, const Grid<double>& scene);

/// Raster front end: prepares the CMF, dispatches on the model mode (or the oracle), and
/// zeroes masked pixels.
SalienceMap predict_scene(const DetectorModel& model, const Raster& cmf, const InferenceOptions& options = {},
                          bool use_oracle = false);

}  // namespace plume
