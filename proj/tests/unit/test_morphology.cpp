#include <numeric>
#include <set>

#include "helpers.hpp"
#include "plume/morphology.hpp"

using namespace plume;

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
  void join(int a, int b) { parent[find(a)] = find(b); }
};

// Partition of true pixels as sets of flat indices, by pairwise adjacency.
std::set<std::set<int>> oracle_partition(const Mask& m, int connectivity) {
  const int n = static_cast<int>(m.size());
  UnionFind uf(n);
  for (int a = 0; a < n; ++a) {
    if (!m.data[a]) continue;
    for (int b = a + 1; b < n; ++b) {
      if (!m.data[b]) continue;
      const int dr = std::abs(a / m.cols - b / m.cols), dc = std::abs(a % m.cols - b % m.cols);
      const bool adj = connectivity == 8 ? std::max(dr, dc) == 1 : dr + dc == 1;
      if (adj) uf.join(a, b);
    }
  }
  std::map<int, std::set<int>> groups;
  for (int a = 0; a < n; ++a)
    if (m.data[a]) groups[uf.find(a)].insert(a);
  std::set<std::set<int>> out;
  for (auto& [k, g] : groups) out.insert(g);
  return out;
}

std::set<std::set<int>> partition_of(const std::vector<Roi>& rois, int cols) {
  std::set<std::set<int>> out;
  for (const auto& r : rois) {
    std::set<int> s;
    for (const auto& p : r.pixels) s.insert(p.row * cols + p.col);
    out.insert(s);
  }
  return out;
}

}  // namespace

TEST(Components, DiagonalPixelsDependOnConnectivity) {
  Mask m(3, 3, 0);
  m(0, 0) = m(1, 1) = 1;
  EXPECT_EQ(connected_components(m, 8).size(), 1u);
  EXPECT_EQ(connected_components(m, 4).size(), 2u);
}

TEST(Components, MatchesUnionFindOracle) {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Mask m = test::random_mask(gen, 32, 32, 0.35);
    for (int conn : {4, 8}) {
      const auto rois = connected_components(m, conn);
      EXPECT_EQ(partition_of(rois, 32), oracle_partition(m, conn));
      size_t total = 0;
      for (const auto& r : rois) total += r.pixels.size();
      EXPECT_EQ(total, count_true(m));
      for (size_t i = 1; i < rois.size(); ++i) EXPECT_LT(rois[i - 1].pixels.front(), rois[i].pixels.front());
    }
  }
}

TEST(Components, BadConnectivityThrows) { EXPECT_THROW(connected_components(Mask(2, 2), 6), Error); }

TEST(Dilate, SinglePixelRadiusOne) {
  Mask m(5, 5, 0);
  m(2, 2) = 1;
  const Mask d = dilate(m, 1);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) EXPECT_EQ(d(r, c), (std::abs(r - 2) <= 1 && std::abs(c - 2) <= 1) ? 1 : 0);
}

TEST(Dilate, RadiusZeroIsIdentity) {
  std::mt19937_64 gen(2);
  const Mask m = test::random_mask(gen, 9, 11, 0.3);
  EXPECT_EQ(dilate(m, 0), m);
}

TEST(Dilate, MatchesExhaustiveDistanceScan) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Mask m = test::random_mask(gen, 16, 16, 0.05);
    for (int radius : {1, 3, 10}) {
      const Mask d = dilate(m, radius);
      for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c) {
          bool near = false;
          for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) near |= m(y, x) && std::max(std::abs(y - r), std::abs(x - c)) <= radius;
          EXPECT_EQ(d(r, c), near ? 1 : 0);
        }
    }
  }
}

TEST(MergedRois, MatchesAllPairsDistanceOracle) {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Mask m = test::random_mask(gen, 40, 40, 0.01);
    const auto comps = connected_components(m, 8);
    const int n = static_cast<int>(comps.size());
    UnionFind uf(n);
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        int best = 1 << 20;
        for (const auto& p : comps[a].pixels)
          for (const auto& q : comps[b].pixels)
            best = std::min(best, std::max(std::abs(p.row - q.row), std::abs(p.col - q.col)));
        if (best <= 10) uf.join(a, b);
      }
    std::map<int, std::set<int>> groups;
    for (int a = 0; a < n; ++a)
      for (const auto& p : comps[a].pixels) groups[uf.find(a)].insert(p.row * 40 + p.col);
    std::set<std::set<int>> expected;
    for (auto& [k, g] : groups) expected.insert(g);
    EXPECT_EQ(partition_of(merged_rois(m, 10), 40), expected);
  }
}

TEST(MergedRois, AnnotatesFromValues) {
  Mask m(4, 4, 0);
  m(1, 1) = m(1, 2) = 1;
  Grid<float> v(4, 4, 0.f);
  v(1, 1) = 700.f;
  v(1, 2) = 1300.f;
  const auto rois = merged_rois(m, 10, &v);
  ASSERT_EQ(rois.size(), 1u);
  EXPECT_EQ(rois[0].area_px, 2);
  EXPECT_DOUBLE_EQ(rois[0].max_val, 1300.0);
  EXPECT_DOUBLE_EQ(rois[0].mean_val, 1000.0);
}

TEST(Accretion, SinglePassStopsAtDirectNeighbours) {
  Mask m(5, 40, 0);
  m(2, 0) = m(2, 8) = m(2, 16) = 1;
  const ComponentLabels cl = label_components(m);
  EXPECT_EQ(accrete_components(cl, {0}, 10, true).size(), 3u);
  EXPECT_EQ(accrete_components(cl, {0}, 10, false).size(), 2u);
  EXPECT_EQ(cluster_components(cl, 10).size(), 1u);
  EXPECT_EQ(cluster_components(cl, 7).size(), 3u);
}
