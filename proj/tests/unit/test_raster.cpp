#include <fstream>
#include <iterator>

#include "helpers.hpp"

using namespace plume;

namespace {
std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}
}  // namespace

TEST(Raster, NodataCellBecomesMasked) {
  const auto dir = test::temp_dir("r");
  {
    std::ofstream h(dir / "a.json");
    h << R"({"rows":2,"cols":2,"bands":1,"nodata":-9999,"bbox":[0,0,60,60],"gsd":30})";
    const float v[4] = {1.f, -9999.f, 3.f, 4.f};
    std::ofstream b(dir / "a.bin", std::ios::binary);
    b.write(reinterpret_cast<const char*>(v), sizeof v);
  }
  const Raster r = read_raster(dir / "a");
  EXPECT_EQ(r.rows, 2);
  EXPECT_EQ(count_true(r.nodata_mask), 1u);
  EXPECT_TRUE(r.masked(0, 1));
  EXPECT_EQ(r.valid_count(), 3u);
}

TEST(Raster, RoundTripIsByteIdentical) {
  const auto dir = test::temp_dir("rt");
  Raster r = test::blank(5, 7, 3);
  for (size_t i = 0; i < r.values.size(); ++i) r.values[i] = static_cast<float>(i) * 0.25f - 3.f;
  r.nodata_mask(2, 3) = 1;
  r.nodata = -9999.0;
  write_raster(r, dir / "x");
  write_raster(read_raster(dir / "x.json"), dir / "y");
  EXPECT_EQ(slurp(dir / "x.json"), slurp(dir / "y.json"));
  EXPECT_EQ(slurp(dir / "x.bin"), slurp(dir / "y.bin"));
}

TEST(Raster, HeaderEcho) {
  const auto dir = test::temp_dir("h");
  write_raster(test::blank(256, 256), dir / "t");
  const Raster r = read_raster(dir / "t.bin");
  EXPECT_EQ(r.rows, 256);
  EXPECT_EQ(r.cols, 256);
  EXPECT_EQ(r.bands, 1);
}

TEST(Raster, TruncatedPayloadIsFormatError) {
  const auto dir = test::temp_dir("trunc");
  write_raster(test::blank(4, 4), dir / "t");
  std::filesystem::resize_file(dir / "t.bin", 20);
  EXPECT_THROW(read_raster(dir / "t"), FormatError);
  EXPECT_THROW(read_raster(dir / "missing"), FormatError);
}

TEST(Raster, ValidateCatchesInconsistentShapes) {
  Raster r = test::blank(4, 4);
  r.values.pop_back();
  EXPECT_THROW(r.validate(), ShapeError);
  Raster s = test::blank(4, 4);
  s.bbox.max_x += 100.0;
  EXPECT_THROW(s.validate(), ShapeError);
}

TEST(Raster, ClipValues) {
  Raster r = test::blank(1, 3);
  r.at(0, 0) = -120.f;
  r.at(0, 1) = 5200.f;
  r.at(0, 2) = 1500.f;
  const Raster c = clip_values(r, 0.0, 4000.0);
  EXPECT_EQ(c.at(0, 0), 0.f);
  EXPECT_EQ(c.at(0, 1), 4000.f);
  EXPECT_EQ(c.at(0, 2), 1500.f);
}
