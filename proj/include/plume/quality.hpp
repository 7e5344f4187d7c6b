#pragma once

#include <optional>
#include <string>
#include <vector>

#include "plume/raster.hpp"

namespace plume {

/// Downtrack median of strictly positive CMF values, one entry per detector column.
struct BgeProfile {
  std::string scene_id;
  std::vector<std::optional<double>> per_column_median;

  /// Median over the non-missing columns; nullopt when every column is missing.
  std::optional<double> scene_median() const;
};

struct CampaignBgeStats {
  double mu_hat = 0.0;     // median of pooled columnwise BGE
  double sigma_hat = 0.0;  // median absolute deviation about mu_hat
  double threshold = 0.0;
  double derived_threshold = 0.0;  // mu_hat + 3 sigma_hat, kept even when overridden
  size_t pooled_count = 0;
};

/// Median of a sample (mean of the two middle values for even sizes).
double median(std::vector<double> values);

BgeProfile bge_profile(const Raster& cmf, const std::string& scene_id = {});

/// Pools every non-missing column entry across profiles. `threshold_override` replaces
/// the derived mu_hat + 3 sigma_hat in `threshold`.
CampaignBgeStats campaign_stats(const std::vector<BgeProfile>& profiles,
                                std::optional<double> threshold_override = std::nullopt);

enum class TriageKind { HighBge, ColumnArtifact, LowValidFraction };

std::string to_string(TriageKind kind);

struct TriageFlag {
  TriageKind kind;
  int column = -1;  // ColumnArtifact only
  double value = 0.0;
  std::string detail;
};

struct TriageConfig {
  double column_factor = 2.0;     // column median vs. neighbour median ratio
  int neighbor_radius = 3;        // columns on each side
  double min_valid_fraction = 0.5;
};

/// Annotates a scene; never filters it.
std::vector<TriageFlag> triage(const Raster& cmf, const CampaignBgeStats& stats, const TriageConfig& config = {});

}  // namespace plume
