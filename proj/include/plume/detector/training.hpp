#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "plume/detector/losses.hpp"
#include "plume/detector/network.hpp"
#include "plume/sampling.hpp"

namespace plume {

struct TrainConfig {
  int max_epochs = 200;
  double learning_rate = 0.003;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 16;
  uint64_t seed = 0;
  double clip_lo = 0.0;
  double clip_hi = 4000.0;
  bool augment = true;
  LossParams loss;
  /// Positive-tile weight; n_bg / n_plume of the training set when unset.
  std::optional<double> w_cls;

  void validate() const;
};

struct TrainingTile {
  TileData data;
  TileClass klass = TileClass::Background;
};

struct TrainResult {
  std::vector<double> epoch_losses;
  double w_cls = 1.0;
};

/// Trains in place with Adam. Deterministic for a fixed seed and tile order: per-sample
/// gradients are reduced in sample order.
TrainResult train(DetectorModel& model, const std::vector<TrainingTile>& tiles, const TrainConfig& config);

/// Mean loss of one pass over `tiles` without augmentation or updates.
double evaluate_loss(const DetectorModel& model, const std::vector<TrainingTile>& tiles, const TrainConfig& config);

/// Grid threshold in {0.00, 0.01, ..., 0.99} maximizing pixelwise F1 of (score >= t);
/// ties go to the larger threshold. Throws when there are no positive labels.
double calibrate_threshold(const std::vector<double>& scores, const std::vector<uint8_t>& labels);

/// Salience calibration over every pixel of the training tiles (pixelwise / multitask).
double calibrate_threshold(const DetectorModel& model, const std::vector<TrainingTile>& tiles,
                           const TrainConfig& config = {});

}  // namespace plume
