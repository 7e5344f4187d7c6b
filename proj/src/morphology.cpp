#include "plume/morphology.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <numeric>
#include <set>

namespace plume {

namespace {

class DisjointSet {
 public:
  explicit DisjointSet(int n) : parent_(static_cast<size_t>(n)) { std::iota(parent_.begin(), parent_.end(), 0); }

  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[a] = b;
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

void Roi::annotate(const Grid<float>& values) {
  area_px = static_cast<int>(pixels.size());
  if (pixels.empty()) {
    max_val = mean_val = 0.0;
    return;
  }
  double mx = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (const auto& p : pixels) {
    const double v = values(p.row, p.col);
    mx = std::max(mx, v);
    sum += v;
  }
  max_val = mx;
  mean_val = sum / static_cast<double>(pixels.size());
}

ComponentLabels label_components(const Mask& mask, int connectivity) {
  if (connectivity != 4 && connectivity != 8) throw Error("connectivity must be 4 or 8");
  ComponentLabels out{Grid<int>(mask.rows, mask.cols, -1), 0};
  std::deque<Pixel> queue;
  for (int r = 0; r < mask.rows; ++r) {
    for (int c = 0; c < mask.cols; ++c) {
      if (!mask(r, c) || out.labels(r, c) >= 0) continue;
      const int id = out.count++;
      out.labels(r, c) = id;
      queue.push_back({r, c});
      while (!queue.empty()) {
        const Pixel p = queue.front();
        queue.pop_front();
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            if (connectivity == 4 && dr != 0 && dc != 0) continue;
            const int nr = p.row + dr, nc = p.col + dc;
            if (!mask.in_bounds(nr, nc) || !mask(nr, nc) || out.labels(nr, nc) >= 0) continue;
            out.labels(nr, nc) = id;
            queue.push_back({nr, nc});
          }
        }
      }
    }
  }
  return out;
}

std::vector<Roi> connected_components(const Mask& mask, int connectivity) {
  const ComponentLabels cl = label_components(mask, connectivity);
  std::vector<Roi> rois(static_cast<size_t>(cl.count));
  for (int r = 0; r < mask.rows; ++r)
    for (int c = 0; c < mask.cols; ++c)
      if (const int id = cl.labels(r, c); id >= 0) rois[id].pixels.push_back({r, c});
  for (int i = 0; i < cl.count; ++i) {
    rois[i].id = i;
    rois[i].area_px = static_cast<int>(rois[i].pixels.size());
  }
  return rois;
}

Mask dilate(const Mask& mask, int radius) {
  if (radius < 0) throw Error("dilate: radius must be >= 0");
  if (radius == 0) return mask;
  // The Chebyshev ball is a square, so a separable running max is exact.
  Mask horiz(mask.rows, mask.cols, 0);
  for (int r = 0; r < mask.rows; ++r) {
    int last = std::numeric_limits<int>::min() / 2;
    for (int c = 0; c < mask.cols; ++c) {
      if (mask(r, c)) last = c;
      if (c - last <= radius) horiz(r, c) = 1;
    }
    last = std::numeric_limits<int>::max() / 2;
    for (int c = mask.cols - 1; c >= 0; --c) {
      if (mask(r, c)) last = c;
      if (last - c <= radius) horiz(r, c) = 1;
    }
  }
  Mask out(mask.rows, mask.cols, 0);
  for (int c = 0; c < mask.cols; ++c) {
    int last = std::numeric_limits<int>::min() / 2;
    for (int r = 0; r < mask.rows; ++r) {
      if (horiz(r, c)) last = r;
      if (r - last <= radius) out(r, c) = 1;
    }
    last = std::numeric_limits<int>::max() / 2;
    for (int r = mask.rows - 1; r >= 0; --r) {
      if (horiz(r, c)) last = r;
      if (last - r <= radius) out(r, c) = 1;
    }
  }
  return out;
}

std::vector<std::pair<int, int>> nearby_component_pairs(const ComponentLabels& cl, int radius) {
  const Grid<int>& lab = cl.labels;
  std::set<std::pair<int, int>> pairs;
  for (int r = 0; r < lab.rows; ++r) {
    for (int c = 0; c < lab.cols; ++c) {
      const int a = lab(r, c);
      if (a < 0) continue;
      // The closest pixel of a component to anything outside it lies on its boundary.
      bool boundary = false;
      for (int dr = -1; dr <= 1 && !boundary; ++dr)
        for (int dc = -1; dc <= 1 && !boundary; ++dc)
          if (!lab.in_bounds(r + dr, c + dc) || lab(r + dr, c + dc) != a) boundary = true;
      if (!boundary) continue;
      const int r0 = std::max(0, r - radius), r1 = std::min(lab.rows - 1, r + radius);
      const int c0 = std::max(0, c - radius), c1 = std::min(lab.cols - 1, c + radius);
      for (int rr = r0; rr <= r1; ++rr) {
        for (int cc = c0; cc <= c1; ++cc) {
          const int b = lab(rr, cc);
          if (b > a) pairs.emplace(a, b);
        }
      }
    }
  }
  return {pairs.begin(), pairs.end()};
}

std::vector<std::vector<int>> cluster_components(const ComponentLabels& cl, int radius) {
  DisjointSet ds(cl.count);
  for (const auto& [a, b] : nearby_component_pairs(cl, radius)) ds.unite(a, b);
  std::vector<std::vector<int>> groups;
  std::vector<int> group_of(static_cast<size_t>(cl.count), -1);
  for (int i = 0; i < cl.count; ++i) {
    const int root = ds.find(i);
    if (group_of[root] < 0) {
      group_of[root] = static_cast<int>(groups.size());
      groups.emplace_back();
    }
    groups[group_of[root]].push_back(i);
  }
  return groups;
}

std::vector<int> accrete_components(const ComponentLabels& cl, const std::vector<int>& seeds, int radius,
                                    bool transitive) {
  std::vector<std::vector<int>> adj(static_cast<size_t>(cl.count));
  for (const auto& [a, b] : nearby_component_pairs(cl, radius)) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<uint8_t> in(static_cast<size_t>(cl.count), 0);
  std::deque<int> frontier;
  for (int s : seeds) {
    if (s < 0 || s >= cl.count) throw Error("accrete_components: seed out of range");
    if (!in[s]) {
      in[s] = 1;
      frontier.push_back(s);
    }
  }
  if (transitive) {
    while (!frontier.empty()) {
      const int cur = frontier.front();
      frontier.pop_front();
      for (int n : adj[cur])
        if (!in[n]) {
          in[n] = 1;
          frontier.push_back(n);
        }
    }
  } else {
    for (int s : std::vector<int>(frontier.begin(), frontier.end()))
      for (int n : adj[s]) in[n] = 1;
  }
  std::vector<int> out;
  for (int i = 0; i < cl.count; ++i)
    if (in[i]) out.push_back(i);
  return out;
}

std::vector<Roi> merged_rois(const Mask& mask, int radius, const Grid<float>* values, int connectivity) {
  const ComponentLabels cl = label_components(mask, connectivity);
  const auto groups = cluster_components(cl, radius);
  std::vector<int> group_of(static_cast<size_t>(cl.count));
  for (size_t g = 0; g < groups.size(); ++g)
    for (int comp : groups[g]) group_of[comp] = static_cast<int>(g);

  std::vector<Roi> rois(groups.size());
  for (int r = 0; r < mask.rows; ++r)
    for (int c = 0; c < mask.cols; ++c)
      if (const int id = cl.labels(r, c); id >= 0) rois[group_of[id]].pixels.push_back({r, c});
  for (size_t i = 0; i < rois.size(); ++i) {
    rois[i].id = static_cast<int>(i);
    if (values)
      rois[i].annotate(*values);
    else
      rois[i].area_px = static_cast<int>(rois[i].pixels.size());
  }
  return rois;
}

Mask roi_mask(const std::vector<Roi>& rois, int rows, int cols) {
  Mask m(rows, cols, 0);
  for (const auto& roi : rois)
    for (const auto& p : roi.pixels) m(p.row, p.col) = 1;
  return m;
}

}  // namespace plume
