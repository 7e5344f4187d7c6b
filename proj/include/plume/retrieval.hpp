#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "plume/raster.hpp"

namespace plume {

/// Per-band target signature (radiance change per ppm-m).
struct TargetSpectrum {
  Eigen::VectorXd t;

  int band_count() const { return static_cast<int>(t.size()); }
  void validate(int bands) const;
};

TargetSpectrum read_target(const std::filesystem::path& path);
void write_target(const TargetSpectrum& target, const std::filesystem::path& path);

/// Gaussian background of one detector column.
struct ColumnBackgroundModel {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;  // sample covariance + ridge * I
  int column_index = 0;
  int sample_count = 0;
  double ridge = 0.0;
  bool valid = false;
};

/// Fits mean and covariance over the rows of `radiance_column` (pixels x bands).
/// Rows flagged in `masked` are skipped. Fewer than two usable rows yields an invalid model.
ColumnBackgroundModel fit_column_background(const Eigen::MatrixXd& radiance_column, double ridge,
                                            const std::vector<uint8_t>* masked = nullptr, int column_index = 0);

/// Default regularization: 1e-6 * trace(sample covariance) / bands.
double auto_ridge(const Eigen::MatrixXd& sample_covariance);

/// Normalized matched filter alpha = t' S^-1 (x - mu) / (t' S^-1 t) with the factorization
/// computed once and reused for every pixel of the column.
class MatchedFilter {
 public:
  MatchedFilter(const ColumnBackgroundModel& model, const TargetSpectrum& target);

  double score(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  double target_energy() const { return denom_; }

 private:
  Eigen::VectorXd mu_;
  Eigen::VectorXd weights_;  // S^-1 t
  double denom_ = 0.0;
};

double matched_filter_score(const Eigen::VectorXd& x, const ColumnBackgroundModel& model,
                            const TargetSpectrum& target);

struct CmfOptions {
  std::optional<double> ridge;  // absolute; nullopt selects auto_ridge per column
  double ppm_scale = 1.0;       // calibration from filter units to ppm-m
  /// When set, refit once excluding pixels whose |score| exceeds this percentile (0-100).
  std::optional<double> outlier_percentile;
};

/// Scores every pixel against its own column's background. Invalid columns come back masked.
Raster cmf_scene(const Raster& radiance, const TargetSpectrum& target, const CmfOptions& options = {});

}  // namespace plume
