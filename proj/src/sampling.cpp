#include "plume/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "plume/morphology.hpp"

namespace plume {

namespace {

// Summed-area table over a 0/1 grid.
class Integral {
 public:
  Integral() = default;
  explicit Integral(const Mask& m) : rows_(m.rows), cols_(m.cols), s_(static_cast<size_t>(m.rows + 1) * (m.cols + 1), 0) {
    for (int r = 0; r < m.rows; ++r) {
      long long run = 0;
      for (int c = 0; c < m.cols; ++c) {
        run += m(r, c) ? 1 : 0;
        at(r + 1, c + 1) = at(r, c + 1) + run;
      }
    }
  }

  long long sum(int r0, int c0, int size) const {
    const int r1 = r0 + size, c1 = c0 + size;
    return at(r1, c1) - at(r0, c1) - at(r1, c0) + at(r0, c0);
  }

 private:
  long long& at(int r, int c) { return s_[static_cast<size_t>(r) * (cols_ + 1) + c]; }
  long long at(int r, int c) const { return s_[static_cast<size_t>(r) * (cols_ + 1) + c]; }
  int rows_ = 0, cols_ = 0;
  std::vector<long long> s_;
};

long long interval_overlap(int a0, int a1, int b0, int b1) { return std::max(0, std::min(a1, b1) - std::max(a0, b0)); }

void mark_tile(Mask& m, int r0, int c0, int size) {
  for (int r = r0; r < r0 + size; ++r)
    for (int c = c0; c < c0 + size; ++c) m(r, c) = 1;
}

Mask window(const Mask& m, int r0, int c0, int size) {
  Mask out(size, size, 0);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) out(r, c) = m(r0 + r, c0 + c);
  return out;
}

double nodata_fraction(const Raster& scene, int r0, int c0, int size) {
  long long n = 0;
  for (int r = r0; r < r0 + size; ++r)
    for (int c = c0; c < c0 + size; ++c) n += scene.masked(r, c) ? 1 : 0;
  return static_cast<double>(n) / (static_cast<double>(size) * size);
}

}  // namespace

std::string to_string(GroupMode m) { return m == GroupMode::IouGraph ? "iou_graph" : "utm_mgrs_zone"; }

GroupMode group_mode_from_string(const std::string& s) {
  if (s == "iou_graph") return GroupMode::IouGraph;
  if (s == "utm_mgrs_zone") return GroupMode::UtmMgrsZone;
  throw FormatError("unknown grouping mode: " + s);
}

std::string to_string(TileClass k) { return k == TileClass::Plume ? "plume" : "background"; }

TileClass tile_class_from_string(const std::string& s) {
  if (s == "plume") return TileClass::Plume;
  if (s == "background") return TileClass::Background;
  throw FormatError("unknown tile class: " + s);
}

long long TileSample::overlap_area(const TileSample& o) const {
  if (scene_id != o.scene_id) return 0;
  return interval_overlap(row0, row0 + size, o.row0, o.row0 + o.size) *
         interval_overlap(col0, col0 + size, o.col0, o.col0 + o.size);
}

bool TileSample::overlaps(const TileSample& o) const { return overlap_area(o) > 0; }

std::map<std::string, std::string> SplitAssignment::scene_split(const std::vector<SceneGroup>& groups) const {
  std::map<std::string, std::string> out;
  const std::set<int> train(train_groups.begin(), train_groups.end());
  for (const auto& g : groups)
    for (const auto& s : g.scene_ids) out[s] = train.count(g.group_id) ? "train" : "test";
  return out;
}

double bbox_iou(const GeoBoundingBox& a, const GeoBoundingBox& b) {
  if (!(a.area() > 0.0) || !(b.area() > 0.0)) throw Error("bbox_iou: degenerate box");
  const double ix = std::max(0.0, std::min(a.max_x, b.max_x) - std::max(a.min_x, b.min_x));
  const double iy = std::max(0.0, std::min(a.max_y, b.max_y) - std::max(a.min_y, b.min_y));
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

std::vector<SceneGroup> group_scenes(const std::vector<SceneInfo>& scenes, GroupMode mode) {
  const size_t n = scenes.size();
  std::vector<size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto unite = [&](size_t a, size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  };

  if (mode == GroupMode::IouGraph) {
    for (size_t i = 0; i < n; ++i)
      for (size_t j = i + 1; j < n; ++j)
        if (bbox_iou(scenes[i].bbox, scenes[j].bbox) > 0.0) unite(i, j);
  } else {
    std::map<std::string, size_t> first;
    for (size_t i = 0; i < n; ++i) {
      if (scenes[i].zone.empty()) throw Error("group_scenes: scene " + scenes[i].scene_id + " lacks a zone id");
      auto [it, inserted] = first.emplace(scenes[i].zone, i);
      if (!inserted) unite(it->second, i);
    }
  }

  std::vector<SceneGroup> groups;
  std::map<size_t, size_t> index_of_root;
  for (size_t i = 0; i < n; ++i) {
    const size_t root = find(i);
    auto [it, inserted] = index_of_root.emplace(root, groups.size());
    if (inserted) groups.push_back({static_cast<int>(groups.size()), {}, mode});
    groups[it->second].scene_ids.push_back(scenes[i].scene_id);
  }
  return groups;
}

SplitAssignment split_groups(const std::vector<SceneGroup>& groups, double fraction, uint64_t seed) {
  if (groups.size() < 2) throw Error("split_groups: need at least 2 groups for a leakage-free split");
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error("split_groups: fraction must be in (0, 1)");
  std::vector<size_t> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  size_t total = 0;
  for (const auto& g : groups) total += g.scene_ids.size();
  const double target = fraction * static_cast<double>(total);

  SplitAssignment out;
  out.fraction = fraction;
  out.seed = seed;
  size_t train_scenes = 0;
  for (size_t idx : order) {
    if (static_cast<double>(train_scenes) < target) {
      out.train_groups.push_back(groups[idx].group_id);
      train_scenes += groups[idx].scene_ids.size();
    } else {
      out.test_groups.push_back(groups[idx].group_id);
    }
  }
  if (out.test_groups.empty()) {
    out.test_groups.push_back(out.train_groups.back());
    out.train_groups.pop_back();
  }
  return out;
}

std::vector<TileSample> sample_plume_tiles(const Raster& scene, const LabelProduct& labels, int size,
                                           const std::string& scene_id, const PlumeTileConfig& config) {
  if (size <= 0) throw Error("sample_plume_tiles: size must be positive");
  if (!labels.plume_mask.same_shape(scene.nodata_mask)) throw ShapeError("sample_plume_tiles: label shape mismatch");
  std::vector<TileSample> tiles;
  if (scene.rows < size || scene.cols < size) return tiles;

  Mask remaining = labels.plume_mask;
  auto overlaps_existing = [&](int r0, int c0) {
    for (const auto& t : tiles)
      if (interval_overlap(r0, r0 + size, t.row0, t.row0 + size) > 0 &&
          interval_overlap(c0, c0 + size, t.col0, t.col0 + size) > 0)
        return true;
    return false;
  };

  // Axis placement: a sub-ROI that fits is centred on its centre of mass (kept fully inside
  // the tile when possible); a longer one is anchored at its leading edge so the rest can be
  // tiled without overlap.
  auto place_axis = [&](double com, int lo, int hi, int extent) {
    int start;
    if (hi - lo + 1 > size) {
      start = lo;
    } else {
      start = static_cast<int>(std::lround(com)) - size / 2;
      start = std::clamp(start, hi - size + 1, lo);
    }
    return std::clamp(start, 0, extent - size);
  };

  while (true) {
    const auto rois = merged_rois(remaining, config.merge_radius);
    if (rois.empty()) break;
    const Roi& roi = rois.front();

    double sr = 0, sc = 0;
    int rlo = std::numeric_limits<int>::max(), rhi = -1, clo = std::numeric_limits<int>::max(), chi = -1;
    for (const auto& p : roi.pixels) {
      sr += p.row;
      sc += p.col;
      rlo = std::min(rlo, p.row);
      rhi = std::max(rhi, p.row);
      clo = std::min(clo, p.col);
      chi = std::max(chi, p.col);
    }
    const double n = static_cast<double>(roi.pixels.size());
    const int r_pref = place_axis(sr / n, rlo, rhi, scene.rows);
    const int c_pref = place_axis(sc / n, clo, chi, scene.cols);

    auto covers_roi = [&](int r0, int c0) {
      for (const auto& p : roi.pixels)
        if (p.row >= r0 && p.row < r0 + size && p.col >= c0 && p.col < c0 + size) return true;
      return false;
    };

    std::set<int> row_opts{r_pref}, col_opts{c_pref};
    for (const auto& t : tiles) {
      row_opts.insert(t.row0 + size);
      row_opts.insert(t.row0 - size);
      col_opts.insert(t.col0 + size);
      col_opts.insert(t.col0 - size);
    }
    bool found = false;
    int best_r = 0, best_c = 0;
    long best_cost = std::numeric_limits<long>::max();
    for (int r0 : row_opts) {
      if (r0 < 0 || r0 > scene.rows - size) continue;
      for (int c0 : col_opts) {
        if (c0 < 0 || c0 > scene.cols - size) continue;
        const long cost = std::labs(r0 - r_pref) + std::labs(c0 - c_pref);
        if (cost >= best_cost) continue;
        if (overlaps_existing(r0, c0) || !covers_roi(r0, c0)) continue;
        best_cost = cost;
        best_r = r0;
        best_c = c0;
        found = true;
      }
    }

    if (!found) {
      // No disjoint tile can reach this sub-ROI; its pixels stay unsampled.
      for (const auto& p : roi.pixels) remaining(p.row, p.col) = 0;
      continue;
    }
    TileSample t;
    t.scene_id = scene_id;
    t.row0 = best_r;
    t.col0 = best_c;
    t.size = size;
    t.klass = TileClass::Plume;
    t.label_patch = window(labels.plume_mask, best_r, best_c, size);
    t.nodata_fraction = nodata_fraction(scene, best_r, best_c, size);
    tiles.push_back(std::move(t));
    for (int r = best_r; r < best_r + size; ++r)
      for (int c = best_c; c < best_c + size; ++c) remaining(r, c) = 0;
  }
  return tiles;
}

namespace {

// One background placement attempt over a fixed set of obstacles.
class BackgroundPacker {
 public:
  BackgroundPacker(const Raster& scene, const Mask& forbidden, const std::vector<TileSample>& existing, int size,
                   const BackgroundTileConfig& config)
      : scene_(scene),
        existing_(existing),
        size_(size),
        area_(static_cast<double>(size) * size),
        forbidden_sum_(forbidden),
        nodata_sum_(scene.nodata_mask),
        eligible_(scene.rows, scene.cols, 0) {
    for (size_t i = 0; i < eligible_.size(); ++i)
      eligible_.data[i] = !forbidden.data[i] && !scene.nodata_mask.data[i];
    uncovered_ = eligible_;
    uncovered_sum_ = Integral(uncovered_);
    max_overlap_ = static_cast<long long>(std::floor(config.max_bg_overlap * area_));
    max_nodata_ = static_cast<long long>(std::floor(config.max_nodata * area_));
    overlap_rows_ = static_cast<int>(max_overlap_ / size);
    step_ = config.grid_step > 0 ? config.grid_step : std::max(1, size / 32);
    lookahead_ = config.lookahead;
  }

  const Mask& eligible() const { return eligible_; }
  const std::vector<TileSample>& tiles() const { return tiles_; }
  long long covered() const { return covered_; }

  // Score: gain in `targets`, then newly covered area less the open ring around the tile
  // (snug fits first); ties take a seeded draw.
  void fill_greedy(const Mask& targets, bool weighted, Rng& rng) {
    Mask pending(scene_.rows, scene_.cols, 0);
    for (size_t i = 0; i < pending.size(); ++i) pending.data[i] = targets.data[i] && uncovered_.data[i];
    Integral pending_sum(pending);
    struct Cand {
      double score;
      uint64_t tag;
      int r0, c0;
    };
    while (true) {
      const auto rows = axis_options(scene_.rows, true, rng);
      const auto cols = axis_options(scene_.cols, false, rng);
      const Integral open = open_sum();
      std::vector<Cand> cands;
      for (int r0 : rows)
        for (int c0 : cols) {
          const long long gain = pending_sum.sum(r0, c0, size_);
          if (gain == 0 || !admissible(r0, c0)) continue;
          const double score = (weighted ? static_cast<double>(gain) * area_ : 0.0) +
                               static_cast<double>(uncovered_sum_.sum(r0, c0, size_)) -
                               static_cast<double>(open_ring(open, r0, c0));
          cands.push_back({score, rng.next_u64(), r0, c0});
        }
      if (cands.empty()) return;
      std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
        return x.score != y.score ? x.score > y.score : x.tag > y.tag;
      });
      // One-step lookahead among the leaders: keep the most pixels still reachable afterwards.
      size_t pick = 0;
      if (!weighted && lookahead_ > 1) {
        long long best = -1;
        for (size_t k = 0; k < std::min(cands.size(), static_cast<size_t>(lookahead_)); ++k) {
          const long long reach = reachable_after(cands[k].r0, cands[k].c0, rows, cols);
          if (reach > best) {
            best = reach;
            pick = k;
          }
        }
      }
      const int best_r = cands[pick].r0, best_c = cands[pick].c0;
      place(best_r, best_c);
      for (int r = best_r; r < best_r + size_; ++r)
        for (int c = best_c; c < best_c + size_; ++c) pending(r, c) = 0;
      pending_sum = Integral(pending);
    }
  }

 private:
  bool admissible(int r0, int c0) const {
    if (forbidden_sum_.sum(r0, c0, size_) > 0) return false;
    if (nodata_sum_.sum(r0, c0, size_) > max_nodata_) return false;
    for (const auto& t : tiles_) {
      const long long a = interval_overlap(r0, r0 + size_, t.row0, t.row0 + size_) *
                          interval_overlap(c0, c0 + size_, t.col0, t.col0 + size_);
      if (a > max_overlap_) return false;
    }
    return true;
  }

  void place(int r0, int c0) {
    TileSample t;
    t.row0 = r0;
    t.col0 = c0;
    t.size = size_;
    t.klass = TileClass::Background;
    t.label_patch = Mask(size_, size_, 0);
    t.nodata_fraction = static_cast<double>(nodata_sum_.sum(r0, c0, size_)) / area_;
    tiles_.push_back(std::move(t));
    covered_ += uncovered_sum_.sum(r0, c0, size_);
    for (int r = r0; r < r0 + size_; ++r)
      for (int c = c0; c < c0 + size_; ++c) uncovered_(r, c) = 0;
    uncovered_sum_ = Integral(uncovered_);
  }

  // Seeded lattice plus positions flush against scene borders and placed tiles.
  std::vector<int> axis_options(int extent, bool rows_axis, Rng& rng) const {
    const int hi = extent - size_;
    std::vector<int> opts;
    auto add = [&](int v) {
      if (v >= 0 && v <= hi) opts.push_back(v);
    };
    for (int v = static_cast<int>(rng.index(static_cast<uint64_t>(step_))); v <= hi; v += step_) add(v);
    add(0);
    add(hi);
    auto snap = [&](int start) {
      add(start + size_);
      add(start - size_);
      add(start + size_ - overlap_rows_);
      add(start - size_ + overlap_rows_);
    };
    for (const auto& t : tiles_) snap(rows_axis ? t.row0 : t.col0);
    for (const auto& t : existing_) snap(rows_axis ? t.row0 : t.col0);
    std::sort(opts.begin(), opts.end());
    opts.erase(std::unique(opts.begin(), opts.end()), opts.end());
    return opts;
  }

  // Uncovered pixels that some admissible tile could still reach once (r0, c0) is placed,
  // plus the pixels the tile itself covers.
  long long reachable_after(int r0, int c0, const std::vector<int>& rows, const std::vector<int>& cols) {
    const int W = scene_.cols + 1;
    std::vector<int> diff(static_cast<size_t>(scene_.rows + 1) * W, 0);
    tiles_.push_back(TileSample{});
    tiles_.back().row0 = r0;
    tiles_.back().col0 = c0;
    for (int r : rows)
      for (int c : cols) {
        if (uncovered_sum_.sum(r, c, size_) == 0 || !admissible(r, c)) continue;
        diff[static_cast<size_t>(r) * W + c] += 1;
        diff[static_cast<size_t>(r) * W + c + size_] -= 1;
        diff[static_cast<size_t>(r + size_) * W + c] -= 1;
        diff[static_cast<size_t>(r + size_) * W + c + size_] += 1;
      }
    tiles_.pop_back();
    long long reach = 0;
    std::vector<int> above(W, 0);
    for (int r = 0; r < scene_.rows; ++r) {
      int run = 0;
      for (int c = 0; c < scene_.cols; ++c) {
        run += diff[static_cast<size_t>(r) * W + c];
        above[c] += run;
        const bool inside = r >= r0 && r < r0 + size_ && c >= c0 && c < c0 + size_;
        if (uncovered_(r, c) && (inside || above[c] > 0)) ++reach;
      }
    }
    return reach;
  }

  // Uncovered pixels in the one-pixel ring around a tile; fewer means a snugger fit.
  Integral open_sum() const {
    Mask m(scene_.rows + 2, scene_.cols + 2, 0);
    for (int r = 0; r < scene_.rows; ++r)
      for (int c = 0; c < scene_.cols; ++c) m(r + 1, c + 1) = uncovered_(r, c);
    return Integral(m);
  }
  long long open_ring(const Integral& open, int r0, int c0) const {
    return open.sum(r0, c0, size_ + 2) - open.sum(r0 + 1, c0 + 1, size_);
  }

  const Raster& scene_;
  const std::vector<TileSample>& existing_;
  int size_;
  double area_;
  Integral forbidden_sum_, nodata_sum_;
  Mask eligible_, uncovered_;
  Integral uncovered_sum_;
  long long max_overlap_ = 0, max_nodata_ = 0, covered_ = 0;
  int overlap_rows_ = 0, step_ = 1, lookahead_ = 0;
  std::vector<TileSample> tiles_;
};

}  // namespace

std::vector<TileSample> sample_background_tiles(const Raster& scene, const LabelProduct& labels,
                                                const std::vector<TileSample>& existing, int size, uint64_t seed,
                                                const std::string& scene_id, const BackgroundTileConfig& config) {
  if (size <= 0) throw Error("sample_background_tiles: size must be positive");
  if (!labels.plume_mask.same_shape(scene.nodata_mask)) throw ShapeError("sample_background_tiles: label shape mismatch");
  if (scene.rows < size || scene.cols < size) return {};

  Mask forbidden = labels.plume_mask;
  for (const auto& t : existing)
    if (t.klass == TileClass::Plume) mark_tile(forbidden, t.row0, t.col0, t.size);

  // Priority pixels are packed first in every attempt; the best-covering attempt wins
  // (earliest on ties).
  std::vector<TileSample> best;
  long long best_covered = -1;
  for (int attempt = 0; attempt < std::max(1, config.attempts); ++attempt) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(attempt)));
    BackgroundPacker packer(scene, forbidden, existing, size, config);
    packer.fill_greedy(labels.bg_priority_mask, true, rng);
    packer.fill_greedy(packer.eligible(), false, rng);
    if (packer.covered() > best_covered) {
      best_covered = packer.covered();
      best = packer.tiles();
    }
  }
  for (auto& t : best) t.scene_id = scene_id;
  return best;
}

double background_coverage(const Raster& scene, const LabelProduct& labels, const std::vector<TileSample>& tiles) {
  Mask eligible(scene.rows, scene.cols, 0);
  for (size_t i = 0; i < eligible.size(); ++i) eligible.data[i] = !labels.plume_mask.data[i] && !scene.nodata_mask.data[i];
  Mask covered(scene.rows, scene.cols, 0);
  for (const auto& t : tiles) {
    if (t.klass == TileClass::Plume) {
      for (int r = t.row0; r < t.row0 + t.size; ++r)
        for (int c = t.col0; c < t.col0 + t.size; ++c) eligible(r, c) = 0;
    } else {
      mark_tile(covered, t.row0, t.col0, t.size);
    }
  }
  long long total = 0, hit = 0;
  for (size_t i = 0; i < eligible.size(); ++i) {
    if (!eligible.data[i]) continue;
    ++total;
    hit += covered.data[i] ? 1 : 0;
  }
  return total == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(total);
}

TileData extract_tile(const Raster& cmf, const Mask& plume_mask, const TileSample& tile) {
  if (tile.row0 < 0 || tile.col0 < 0 || tile.row0 + tile.size > cmf.rows || tile.col0 + tile.size > cmf.cols)
    throw ShapeError("extract_tile: tile outside scene " + tile.scene_id);
  TileData d{Grid<float>(tile.size, tile.size), Mask(tile.size, tile.size), Mask(tile.size, tile.size)};
  for (int r = 0; r < tile.size; ++r)
    for (int c = 0; c < tile.size; ++c) {
      d.values(r, c) = cmf.at(tile.row0 + r, tile.col0 + c);
      d.nodata(r, c) = cmf.masked(tile.row0 + r, tile.col0 + c);
      d.label(r, c) = plume_mask(tile.row0 + r, tile.col0 + c);
    }
  return d;
}

TileData augment(const TileData& tile, int op) {
  return {apply_dihedral(tile.values, op), apply_dihedral(tile.nodata, op), apply_dihedral(tile.label, op)};
}

TileSample augment(const TileSample& tile, int op) {
  TileSample out = tile;
  out.label_patch = apply_dihedral(tile.label_patch, op);
  return out;
}

void write_tile_manifest(const std::vector<TileSample>& tiles, const std::filesystem::path& jsonl) {
  std::ofstream out(jsonl);
  if (!out) throw Error("cannot write " + jsonl.string());
  for (const auto& t : tiles) {
    nlohmann::json j;
    j["scene_id"] = t.scene_id;
    j["row0"] = t.row0;
    j["col0"] = t.col0;
    j["size"] = t.size;
    j["klass"] = to_string(t.klass);
    j["split"] = t.split;
    out << j.dump() << "\n";
  }
}

std::vector<TileSample> read_tile_manifest(const std::filesystem::path& jsonl) {
  std::ifstream in(jsonl);
  if (!in) throw FormatError("tile manifest not found: " + jsonl.string());
  std::vector<TileSample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TileSample t;
      t.scene_id = j.at("scene_id").get<std::string>();
      t.row0 = j.at("row0").get<int>();
      t.col0 = j.at("col0").get<int>();
      t.size = j.at("size").get<int>();
      t.klass = tile_class_from_string(j.at("klass").get<std::string>());
      t.split = j.value("split", std::string());
      out.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(jsonl.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace plume
