#include "plume/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace plume {

namespace {
constexpr float kCmfNodata = -9999.0f;
}

void TargetSpectrum::validate(int bands) const {
  if (band_count() != bands)
    throw ShapeError("target spectrum has " + std::to_string(band_count()) + " bands, radiance has " +
                     std::to_string(bands));
  if (t.size() == 0 || t.isZero(0.0)) throw Error("target spectrum must not be the zero vector");
}

TargetSpectrum read_target(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("target spectrum not found: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed target spectrum: " + std::string(e.what()));
  }
  if (!j.is_array()) throw FormatError("target spectrum must be a JSON array");
  TargetSpectrum ts;
  ts.t.resize(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) ts.t[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return ts;
}

void write_target(const TargetSpectrum& target, const std::filesystem::path& path) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < target.t.size(); ++i) j.push_back(target.t[i]);
  std::ofstream out(path);
  out << j.dump() << "\n";
}

double auto_ridge(const Eigen::MatrixXd& sample_covariance) {
  if (sample_covariance.rows() == 0) return 0.0;
  return 1e-6 * sample_covariance.trace() / static_cast<double>(sample_covariance.rows());
}

namespace {

struct SampleMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  int n = 0;
};

SampleMoments moments(const Eigen::MatrixXd& x, const std::vector<uint8_t>* masked) {
  const Eigen::Index bands = x.cols();
  SampleMoments m{Eigen::VectorXd::Zero(bands), Eigen::MatrixXd::Zero(bands, bands), 0};
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (masked && (*masked)[static_cast<size_t>(i)]) continue;
    m.mean += x.row(i).transpose();
    ++m.n;
  }
  if (m.n < 2) return m;
  m.mean /= m.n;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (masked && (*masked)[static_cast<size_t>(i)]) continue;
    const Eigen::VectorXd d = x.row(i).transpose() - m.mean;
    m.cov.noalias() += d * d.transpose();
  }
  m.cov /= (m.n - 1);
  m.cov = 0.5 * (m.cov + m.cov.transpose());
  return m;
}

}  // namespace

ColumnBackgroundModel fit_column_background(const Eigen::MatrixXd& radiance_column, double ridge,
                                            const std::vector<uint8_t>* masked, int column_index) {
  if (masked && masked->size() != static_cast<size_t>(radiance_column.rows()))
    throw ShapeError("fit_column_background: mask length mismatch");
  if (ridge < 0.0) throw Error("fit_column_background: ridge must be >= 0");
  const SampleMoments m = moments(radiance_column, masked);
  ColumnBackgroundModel model;
  model.column_index = column_index;
  model.sample_count = m.n;
  model.ridge = ridge;
  if (m.n < 2) return model;
  model.mu = m.mean;
  model.sigma = m.cov;
  model.sigma.diagonal().array() += ridge;
  model.valid = true;
  return model;
}

MatchedFilter::MatchedFilter(const ColumnBackgroundModel& model, const TargetSpectrum& target) {
  if (!model.valid) throw Error("matched filter: background model is invalid");
  target.validate(static_cast<int>(model.mu.size()));
  Eigen::LLT<Eigen::MatrixXd> llt(model.sigma);
  if (llt.info() != Eigen::Success) throw Error("matched filter: covariance is not positive definite");
  weights_ = llt.solve(target.t);
  denom_ = target.t.dot(weights_);
  if (!(denom_ > 0.0) || !std::isfinite(denom_)) throw Error("matched filter: degenerate target energy");
  mu_ = model.mu;
}

double MatchedFilter::score(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != mu_.size()) throw ShapeError("matched filter: pixel band count mismatch");
  return weights_.dot(x - mu_) / denom_;
}

double matched_filter_score(const Eigen::VectorXd& x, const ColumnBackgroundModel& model,
                            const TargetSpectrum& target) {
  return MatchedFilter(model, target).score(x);
}

namespace {

// Fits and scores one column; returns false when the column cannot be modelled.
bool score_column(const Eigen::MatrixXd& pixels, std::vector<uint8_t> masked, const TargetSpectrum& target,
                  const CmfOptions& opt, int col, std::vector<double>& scores) {
  auto fit = [&](const std::vector<uint8_t>& m) {
    double ridge = 0.0;
    if (opt.ridge) {
      ridge = *opt.ridge;
    } else {
      const SampleMoments sm = moments(pixels, &m);
      if (sm.n < 2) return ColumnBackgroundModel{};
      ridge = auto_ridge(sm.cov);
    }
    return fit_column_background(pixels, ridge, &m, col);
  };

  auto run = [&](const std::vector<uint8_t>& m) -> bool {
    const ColumnBackgroundModel model = fit(m);
    if (!model.valid) return false;
    try {
      const MatchedFilter mf(model, target);
      for (Eigen::Index i = 0; i < pixels.rows(); ++i)
        scores[static_cast<size_t>(i)] = masked[static_cast<size_t>(i)] ? 0.0 : mf.score(pixels.row(i).transpose());
    } catch (const Error&) {
      return false;
    }
    return true;
  };

  if (!run(masked)) return false;
  if (opt.outlier_percentile) {
    std::vector<double> mags;
    for (size_t i = 0; i < scores.size(); ++i)
      if (!masked[i]) mags.push_back(std::abs(scores[i]));
    if (mags.empty()) return false;
    std::sort(mags.begin(), mags.end());
    const double q = std::clamp(*opt.outlier_percentile, 0.0, 100.0) / 100.0;
    const double cut = mags[static_cast<size_t>(std::floor(q * static_cast<double>(mags.size() - 1)))];
    std::vector<uint8_t> refit_mask = masked;
    for (size_t i = 0; i < scores.size(); ++i)
      if (!masked[i] && std::abs(scores[i]) > cut) refit_mask[i] = 1;
    const ColumnBackgroundModel model = fit(refit_mask);
    if (!model.valid) return false;
    try {
      const MatchedFilter mf(model, target);
      for (Eigen::Index i = 0; i < pixels.rows(); ++i)
        if (!masked[static_cast<size_t>(i)]) scores[static_cast<size_t>(i)] = mf.score(pixels.row(i).transpose());
    } catch (const Error&) {
      return false;
    }
  }
  return true;
}

}  // namespace

Raster cmf_scene(const Raster& radiance, const TargetSpectrum& target, const CmfOptions& options) {
  radiance.validate();
  target.validate(radiance.bands);
  Raster out = radiance.like(1);
  out.nodata = kCmfNodata;
  out.band_names = {"cmf_ppm_m"};

  parallel_for(static_cast<size_t>(radiance.cols), [&](size_t ci) {
    const int c = static_cast<int>(ci);
    Eigen::MatrixXd pixels(radiance.rows, radiance.bands);
    std::vector<uint8_t> masked(static_cast<size_t>(radiance.rows));
    for (int r = 0; r < radiance.rows; ++r) {
      masked[static_cast<size_t>(r)] = radiance.masked(r, c);
      for (int b = 0; b < radiance.bands; ++b) pixels(r, b) = radiance.at(b, r, c);
    }
    std::vector<double> scores(static_cast<size_t>(radiance.rows), 0.0);
    const bool ok = score_column(pixels, masked, target, options, c, scores);
    for (int r = 0; r < radiance.rows; ++r) {
      if (!ok || masked[static_cast<size_t>(r)]) {
        out.nodata_mask(r, c) = 1;
        out.at(r, c) = kCmfNodata;
      } else {
        out.at(r, c) = static_cast<float>(options.ppm_scale * scores[static_cast<size_t>(r)]);
      }
    }
  });
  return out;
}

}  // namespace plume
