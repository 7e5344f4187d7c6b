#include "plume/detector/losses.hpp"

#include <algorithm>
#include <cmath>

namespace plume {

void LossParams::validate() const {
  if (!(w_cls > 0.0 && w_seg > 0.0 && alpha_f > 0.0 && gamma_f > 0.0))
    throw Error("loss params: weights must be positive");
  if (alpha_seg < 0.0 || alpha_seg > 1.0) throw Error("loss params: alpha_seg must lie in [0, 1]");
}

LossValue loss_bce(double p, double y, double w_plus) {
  const bool clamped = p < kProbEpsilon || p > 1.0 - kProbEpsilon;
  const double pc = std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
  LossValue v;
  v.loss = -(w_plus * y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
  v.grad = clamped ? 0.0 : -w_plus * y / pc + (1.0 - y) / (1.0 - pc);
  return v;
}

double class_weight(size_t n_bg, size_t n_plume) {
  if (n_plume == 0) throw Error("class_weight: no plume tiles");
  return static_cast<double>(n_bg) / static_cast<double>(n_plume);
}

LossValue focal_pixel(double p, double y, double w_plus, const LossParams& params) {
  const bool clamped = p < kProbEpsilon || p > 1.0 - kProbEpsilon;
  const double pc = std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
  const LossValue bce = loss_bce(pc, y, w_plus);
  const double q = y * pc + (1.0 - y) * (1.0 - pc);
  const double dq = 2.0 * y - 1.0;
  const double g = params.gamma_f;

  double m, dm;
  if (params.focal_form == FocalForm::Paper) {
    const double e = std::exp(-q);
    const double base = 1.0 - e;
    m = std::pow(base, g);
    dm = g * std::pow(base, g - 1.0) * e;
  } else {
    const double base = 1.0 - q;
    m = std::pow(base, g);
    dm = -g * std::pow(base, g - 1.0);
  }
  LossValue v;
  v.loss = params.alpha_f * m * bce.loss;
  v.grad = clamped ? 0.0 : params.alpha_f * (dm * dq * bce.loss + m * bce.grad);
  return v;
}

PatchLoss loss_focal(const Grid<double>& P, const Grid<double>& Y, double w_seg, const LossParams& params) {
  if (!P.same_shape(Y)) throw ShapeError("loss_focal: patch shape mismatch");
  PatchLoss out{0.0, Grid<double>(P.rows, P.cols, 0.0)};
  if (P.size() == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(P.size());
  for (size_t i = 0; i < P.size(); ++i) {
    const LossValue v = focal_pixel(P.data[i], Y.data[i], w_seg, params);
    out.loss += v.loss;
    out.grad.data[i] = v.grad * inv_n;
  }
  out.loss *= inv_n;
  return out;
}

PatchLoss loss_multitask(const Grid<double>& P, const Grid<double>& Y, const LossParams& params, double w_cls) {
  if (!P.same_shape(Y)) throw ShapeError("loss_multitask: patch shape mismatch");
  if (P.size() == 0) throw ShapeError("loss_multitask: empty patch");
  PatchLoss out = loss_focal(P, Y, params.w_seg, params);
  out.loss *= params.alpha_seg;
  for (auto& g : out.grad.data) g *= params.alpha_seg;

  const auto pmax = std::max_element(P.data.begin(), P.data.end());  // first maximum
  const double ymax = *std::max_element(Y.data.begin(), Y.data.end());
  const LossValue tile = loss_bce(*pmax, ymax, w_cls);
  out.loss += (1.0 - params.alpha_seg) * tile.loss;
  out.grad.data[static_cast<size_t>(pmax - P.data.begin())] += (1.0 - params.alpha_seg) * tile.grad;
  return out;
}

}  // namespace plume
