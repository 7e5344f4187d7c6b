#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <string>

#include "plume/common.hpp"
#include "plume/raster.hpp"

namespace plume::test {

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  auto dir = std::filesystem::temp_directory_path() / "plume-kit-tests" /
             (std::string(info->test_suite_name()) + "." + info->name() + "." + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Raster blank(int rows, int cols, int bands = 1, float fill = 0.0f) {
  Raster r(rows, cols, bands, fill);
  r.gsd = 30.0;
  r.bbox = bbox_from_origin(0.0, 0.0, rows, cols, 30.0);
  return r;
}

inline void paint(Raster& r, int r0, int c0, int h, int w, float v) {
  for (int y = r0; y < r0 + h; ++y)
    for (int x = c0; x < c0 + w; ++x) r.at(y, x) = v;
}

inline Mask random_mask(std::mt19937_64& gen, int rows, int cols, double p) {
  std::bernoulli_distribution d(p);
  Mask m(rows, cols, 0);
  for (auto& v : m.data) v = d(gen) ? 1 : 0;
  return m;
}

}  // namespace plume::test
