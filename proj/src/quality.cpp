#include "plume/quality.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace plume {

double median(std::vector<double> values) {
  if (values.empty()) throw Error("median of empty sample");
  const size_t n = values.size();
  const size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::optional<double> BgeProfile::scene_median() const {
  std::vector<double> v;
  for (const auto& e : per_column_median)
    if (e) v.push_back(*e);
  if (v.empty()) return std::nullopt;
  return median(std::move(v));
}

BgeProfile bge_profile(const Raster& cmf, const std::string& scene_id) {
  if (cmf.bands != 1) throw ShapeError("bge_profile expects a 1-band CMF");
  BgeProfile p;
  p.scene_id = scene_id;
  p.per_column_median.resize(static_cast<size_t>(cmf.cols));
  std::vector<double> positives;
  for (int c = 0; c < cmf.cols; ++c) {
    positives.clear();
    for (int r = 0; r < cmf.rows; ++r) {
      if (cmf.masked(r, c)) continue;
      const float v = cmf.at(r, c);
      if (v > 0.0f) positives.push_back(v);
    }
    if (!positives.empty()) p.per_column_median[static_cast<size_t>(c)] = median(positives);
  }
  return p;
}

CampaignBgeStats campaign_stats(const std::vector<BgeProfile>& profiles, std::optional<double> threshold_override) {
  std::vector<double> pooled;
  for (const auto& p : profiles)
    for (const auto& e : p.per_column_median)
      if (e) pooled.push_back(*e);
  if (pooled.empty()) throw Error("campaign_stats: no non-missing BGE entries");

  CampaignBgeStats s;
  s.pooled_count = pooled.size();
  s.mu_hat = median(pooled);
  std::vector<double> dev(pooled.size());
  std::transform(pooled.begin(), pooled.end(), dev.begin(), [&](double x) { return std::abs(x - s.mu_hat); });
  s.sigma_hat = median(std::move(dev));
  s.derived_threshold = s.mu_hat + 3.0 * s.sigma_hat;
  s.threshold = threshold_override.value_or(s.derived_threshold);
  return s;
}

std::string to_string(TriageKind kind) {
  switch (kind) {
    case TriageKind::HighBge:
      return "HIGH_BGE";
    case TriageKind::ColumnArtifact:
      return "COLUMN_ARTIFACT";
    case TriageKind::LowValidFraction:
      return "LOW_VALID_FRACTION";
  }
  return "UNKNOWN";
}

std::vector<TriageFlag> triage(const Raster& cmf, const CampaignBgeStats& stats, const TriageConfig& config) {
  std::vector<TriageFlag> flags;
  const BgeProfile profile = bge_profile(cmf);

  if (const auto scene_bge = profile.scene_median(); scene_bge && *scene_bge > stats.threshold) {
    std::ostringstream os;
    os << "scene median BGE " << *scene_bge << " exceeds threshold " << stats.threshold;
    flags.push_back({TriageKind::HighBge, -1, *scene_bge, os.str()});
  }

  const int n = static_cast<int>(profile.per_column_median.size());
  for (int c = 0; c < n; ++c) {
    const auto& own = profile.per_column_median[static_cast<size_t>(c)];
    if (!own) continue;
    std::vector<double> neighbors;
    for (int d = -config.neighbor_radius; d <= config.neighbor_radius; ++d) {
      const int k = c + d;
      if (d == 0 || k < 0 || k >= n) continue;
      if (const auto& e = profile.per_column_median[static_cast<size_t>(k)]) neighbors.push_back(*e);
    }
    if (neighbors.empty()) continue;
    const double ref = median(neighbors);
    if (ref > 0.0 && *own > config.column_factor * ref) {
      std::ostringstream os;
      os << "column " << c << " BGE " << *own << " vs neighbour median " << ref;
      flags.push_back({TriageKind::ColumnArtifact, c, *own, os.str()});
    }
  }

  const double valid_fraction =
      cmf.pixel_count() == 0 ? 0.0 : static_cast<double>(cmf.valid_count()) / static_cast<double>(cmf.pixel_count());
  if (valid_fraction < config.min_valid_fraction) {
    std::ostringstream os;
    os << "valid fraction " << valid_fraction << " below " << config.min_valid_fraction;
    flags.push_back({TriageKind::LowValidFraction, -1, valid_fraction, os.str()});
  }
  return flags;
}

}  // namespace plume
