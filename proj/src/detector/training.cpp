#include "plume/detector/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace plume {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error("train: learning_rate must be positive");
  if (!(clip_lo < clip_hi)) throw Error("train: clip range must satisfy lo < hi");
  if (max_epochs < 1) throw Error("train: max_epochs must be at least 1");
  if (batch_size < 1) throw Error("train: batch_size must be at least 1");
  if (w_cls && !(*w_cls > 0.0)) throw Error("train: w_cls must be positive");
  loss.validate();
}

namespace {

struct SampleResult {
  double loss = 0.0;
  std::vector<double> grads;
};

Grid<double> label_grid(const Mask& m) {
  Grid<double> y(m.rows, m.cols, 0.0);
  for (size_t i = 0; i < m.size(); ++i) y.data[i] = m.data[i] ? 1.0 : 0.0;
  return y;
}

// Loss and, when `grads` is non-null, its parameter gradient for one tile.
double sample_loss(const DetectorModel& model, const TrainingTile& tile, int op, const TrainConfig& cfg, double w_cls,
                   std::vector<double>* grads) {
  const TileData data = op == 0 ? tile.data : augment(tile.data, op);
  const Tensor input = Tensor::from_grid(prepare_input(data.values, data.nodata, cfg.clip_lo, cfg.clip_hi));
  ForwardCache cache;
  const Tensor out = model.forward(input, grads ? &cache : nullptr);
  Tensor dout(out.c, out.h, out.w);
  double loss = 0.0;
  if (model.mode() == DetectorMode::Tilewise) {
    if (out.v.size() != 1) throw ShapeError("train: tilewise tiles must match the model tile size");
    const double y = tile.klass == TileClass::Plume ? 1.0 : 0.0;
    const LossValue v = loss_bce(out.v[0], y, w_cls);
    loss = v.loss;
    dout.v[0] = v.grad;
  } else {
    Grid<double> P(out.h, out.w);
    std::copy(out.v.begin(), out.v.end(), P.data.begin());
    const Grid<double> Y = label_grid(data.label);
    const PatchLoss pl = model.mode() == DetectorMode::Pixelwise ? loss_focal(P, Y, cfg.loss.w_seg, cfg.loss)
                                                                  : loss_multitask(P, Y, cfg.loss, w_cls);
    loss = pl.loss;
    std::copy(pl.grad.data.begin(), pl.grad.data.end(), dout.v.begin());
  }
  if (grads) {
    grads->assign(model.params().size(), 0.0);
    model.backward(cache, dout, *grads);
  }
  return loss;
}

double resolve_w_cls(const std::vector<TrainingTile>& tiles, const TrainConfig& cfg) {
  size_t n_plume = 0;
  for (const auto& t : tiles) n_plume += t.klass == TileClass::Plume ? 1 : 0;
  const size_t n_bg = tiles.size() - n_plume;
  if (n_plume == 0 || n_bg == 0) throw Error("train: manifest must contain both plume and background tiles");
  return cfg.w_cls ? *cfg.w_cls : class_weight(n_bg, n_plume);
}

}  // namespace

TrainResult train(DetectorModel& model, const std::vector<TrainingTile>& tiles, const TrainConfig& cfg) {
  cfg.validate();
  if (tiles.empty()) throw Error("train: empty manifest");
  TrainResult result;
  result.w_cls = resolve_w_cls(tiles, cfg);

  const size_t n_params = model.params().size();
  std::vector<double> m(n_params, 0.0), v(n_params, 0.0);
  Rng rng(derive_seed(cfg.seed, 0x747261696eull));
  std::vector<size_t> order(tiles.size());
  std::iota(order.begin(), order.end(), size_t{0});
  long long step = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    std::vector<int> ops(tiles.size(), 0);
    if (cfg.augment)
      for (auto& op : ops) op = rng.integer(0, 7);
    double epoch_loss = 0.0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t count = std::min(static_cast<size_t>(cfg.batch_size), order.size() - start);
      std::vector<SampleResult> res(count);
      parallel_for(count, [&](size_t k) {
        const size_t idx = order[start + k];
        res[k].loss = sample_loss(model, tiles[idx], ops[idx], cfg, result.w_cls, &res[k].grads);
      });
      std::vector<double> g(n_params, 0.0);
      for (const auto& r : res) {
        epoch_loss += r.loss;
        for (size_t i = 0; i < n_params; ++i) g[i] += r.grads[i];
      }
      const double inv = 1.0 / static_cast<double>(count);
      ++step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      auto& p = model.params();
      for (size_t i = 0; i < n_params; ++i) {
        const double gi = g[i] * inv;
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
        p[i] -= cfg.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps);
      }
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(tiles.size()));
  }
  model.round_to_float();
  return result;
}

double evaluate_loss(const DetectorModel& model, const std::vector<TrainingTile>& tiles, const TrainConfig& cfg) {
  cfg.validate();
  if (tiles.empty()) return 0.0;
  const double w_cls = resolve_w_cls(tiles, cfg);
  std::vector<double> losses(tiles.size());
  parallel_for(tiles.size(), [&](size_t i) { losses[i] = sample_loss(model, tiles[i], 0, cfg, w_cls, nullptr); });
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(tiles.size());
}

double calibrate_threshold(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
  if (scores.size() != labels.size()) throw ShapeError("calibrate_threshold: size mismatch");
  constexpr int kSteps = 100;
  // tp_at[k] / fp_at[k]: pixels whose score first fails the threshold k / 100 at k + 1.
  std::vector<long long> pos_hist(kSteps + 1, 0), neg_hist(kSteps + 1, 0);
  long long positives = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const double s = scores[i];
    int k = std::clamp(static_cast<int>(std::floor(s * kSteps)), -1, kSteps - 1);
    while (k + 1 < kSteps && s >= (k + 1) / static_cast<double>(kSteps)) ++k;
    while (k >= 0 && !(s >= k / static_cast<double>(kSteps))) --k;
    // Passes every threshold j / 100 with j <= k.
    auto& hist = labels[i] ? pos_hist : neg_hist;
    hist[static_cast<size_t>(k + 1)] += 1;
    positives += labels[i] ? 1 : 0;
  }
  if (positives == 0) throw Error("calibrate_threshold: no positive labels");
  // Count of pixels passing threshold j = sum of hist[k + 1] for k >= j.
  long long tp = 0, fp = 0;
  double best_f1 = -1.0;
  int best = kSteps - 1;
  for (int j = kSteps - 1; j >= 0; --j) {
    tp += pos_hist[static_cast<size_t>(j + 1)];
    fp += neg_hist[static_cast<size_t>(j + 1)];
    const long long fn = positives - tp;
    const long long denom = 2 * tp + fp + fn;
    const double f1 = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    if (f1 > best_f1) {
      best_f1 = f1;
      best = j;
    }
  }
  return best / static_cast<double>(kSteps);
}

double calibrate_threshold(const DetectorModel& model, const std::vector<TrainingTile>& tiles,
                           const TrainConfig& cfg) {
  if (model.mode() == DetectorMode::Tilewise) throw Error("calibrate_threshold: model must be pixelwise or multitask");
  std::vector<Grid<double>> outs(tiles.size());
  parallel_for(tiles.size(), [&](size_t i) {
    const auto& d = tiles[i].data;
    outs[i] = forward(model, prepare_input(d.values, d.nodata, cfg.clip_lo, cfg.clip_hi)).salience;
  });
  std::vector<double> scores;
  std::vector<uint8_t> labels;
  for (size_t i = 0; i < tiles.size(); ++i) {
    scores.insert(scores.end(), outs[i].data.begin(), outs[i].data.end());
    for (uint8_t l : tiles[i].data.label.data) labels.push_back(l ? 1 : 0);
  }
  return calibrate_threshold(scores, labels);
}

}  // namespace plume
