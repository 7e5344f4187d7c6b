#pragma once

#include <cstddef>

#include "plume/common.hpp"

namespace plume {

/// Probabilities are clamped to [kProbEpsilon, 1 - kProbEpsilon] before any log.
inline constexpr double kProbEpsilon = 1e-7;

enum class FocalForm {
  Paper,      // alpha * (1 - exp(-p+))^gamma * bce
  Canonical,  // alpha * (1 - p+)^gamma * bce
};

struct LossParams {
  double w_cls = 1.0;    // positive-tile weight, usually n_bg / n_plume
  double w_seg = 1.25;   // positive-pixel weight
  double alpha_f = 0.25;
  double gamma_f = 2.0;
  double alpha_seg = 0.5;
  FocalForm focal_form = FocalForm::Paper;

  void validate() const;
};

struct LossValue {
  double loss = 0.0;
  double grad = 0.0;  // d loss / d p
};

struct PatchLoss {
  double loss = 0.0;
  Grid<double> grad;  // d loss / d P, same shape as P
};

/// Weighted binary cross entropy -[w y log p + (1 - y) log(1 - p)].
LossValue loss_bce(double p, double y, double w_plus);

/// n_bg / n_plume; throws when there are no plume tiles.
double class_weight(size_t n_bg, size_t n_plume);

/// Per-pixel focal term alpha_f * m(p+) * bce(p, y, w) with p+ = y p + (1 - y)(1 - p).
LossValue focal_pixel(double p, double y, double w_plus, const LossParams& params);

/// Mean of focal_pixel over the patch.
PatchLoss loss_focal(const Grid<double>& P, const Grid<double>& Y, double w_seg, const LossParams& params = {});

/// alpha_seg * focal(P, Y, w_seg) + (1 - alpha_seg) * bce(max P, max Y, w_cls).
/// The tile term's gradient goes to the first maximal pixel of P in row-major order.
PatchLoss loss_multitask(const Grid<double>& P, const Grid<double>& Y, const LossParams& params, double w_cls);

}  // namespace plume
