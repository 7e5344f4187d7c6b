#include "plume/raster.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace plume {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kDefaultNodata = -9999.0;

fs::path stem_of(const fs::path& path) {
  const auto ext = path.extension();
  if (ext == ".json" || ext == ".bin") {
    fs::path p = path;
    return p.replace_extension();
  }
  return path;
}

fs::path with_suffix(const fs::path& stem, const char* suffix) {
  return fs::path(stem.string() + suffix);
}

bool is_nodata(float v, float nodata) {
  if (std::isnan(nodata)) return std::isnan(v);
  return v == nodata;
}

uint32_t byteswap32(uint32_t v) {
  return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
}

void to_little_endian(std::vector<float>& v) {
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& f : v) f = std::bit_cast<float>(byteswap32(std::bit_cast<uint32_t>(f)));
  }
}

}  // namespace

Raster::Raster(int r, int c, int b, float fill)
    : rows(r), cols(c), bands(b), values(static_cast<size_t>(r) * c * b, fill), nodata_mask(r, c, 0) {
  if (r < 0 || c < 0 || b < 1) throw ShapeError("Raster: invalid dimensions");
  bbox = bbox_from_origin(0.0, 0.0, r, c, gsd);
  for (int i = 0; i < b; ++i) band_names.push_back("band_" + std::to_string(i));
}

Grid<float> Raster::band(int b) const {
  Grid<float> g(rows, cols);
  std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(index(b, 0, 0)), pixel_count(), g.data.begin());
  return g;
}

Raster Raster::like(int n_bands) const {
  Raster out(rows, cols, n_bands);
  out.nodata_mask = nodata_mask;
  out.bbox = bbox;
  out.gsd = gsd;
  out.nodata = nodata;
  return out;
}

void Raster::validate() const {
  if (rows < 0 || cols < 0 || bands < 1) throw ShapeError("raster: invalid dimensions");
  if (values.size() != static_cast<size_t>(rows) * cols * bands)
    throw ShapeError("raster: values size does not match rows*cols*bands");
  if (nodata_mask.rows != rows || nodata_mask.cols != cols) throw ShapeError("raster: mask shape mismatch");
  if (gsd <= 0.0) throw ShapeError("raster: gsd must be positive");
  if (std::abs(bbox.width() - cols * gsd) >= gsd || std::abs(bbox.height() - rows * gsd) >= gsd)
    throw ShapeError("raster: bbox inconsistent with dimensions and gsd");
}

GeoBoundingBox bbox_from_origin(double min_x, double min_y, int rows, int cols, double gsd) {
  return {min_x, min_y, min_x + cols * gsd, min_y + rows * gsd};
}

Raster read_raster(const fs::path& path) {
  const fs::path stem = stem_of(path);
  const fs::path header_path = with_suffix(stem, ".json");
  const fs::path payload_path = with_suffix(stem, ".bin");

  std::ifstream hin(header_path);
  if (!hin) throw FormatError("raster header not found: " + header_path.string());
  json h;
  try {
    hin >> h;
  } catch (const json::exception& e) {
    throw FormatError("malformed raster header " + header_path.string() + ": " + e.what());
  }

  Raster r;
  try {
    r.rows = h.at("rows").get<int>();
    r.cols = h.at("cols").get<int>();
    r.bands = h.at("bands").get<int>();
    if (!h.at("nodata").is_null()) r.nodata = h.at("nodata").get<double>();
    const auto bb = h.at("bbox").get<std::vector<double>>();
    if (bb.size() != 4) throw FormatError("bbox must have 4 entries");
    r.bbox = {bb[0], bb[1], bb[2], bb[3]};
    r.gsd = h.at("gsd").get<double>();
    if (h.contains("bands_meta")) r.band_names = h.at("bands_meta").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError("malformed raster header " + header_path.string() + ": " + e.what());
  }
  if (r.rows < 0 || r.cols < 0 || r.bands < 1) throw FormatError("raster header has invalid dimensions");

  const size_t n = static_cast<size_t>(r.rows) * r.cols * r.bands;
  std::ifstream pin(payload_path, std::ios::binary);
  if (!pin) throw FormatError("raster payload not found: " + payload_path.string());
  pin.seekg(0, std::ios::end);
  const auto bytes = static_cast<size_t>(pin.tellg());
  if (bytes != n * sizeof(float))
    throw FormatError("raster payload size mismatch: expected " + std::to_string(n * sizeof(float)) +
                      " bytes, found " + std::to_string(bytes));
  pin.seekg(0);
  r.values.resize(n);
  pin.read(reinterpret_cast<char*>(r.values.data()), static_cast<std::streamsize>(bytes));
  to_little_endian(r.values);

  r.nodata_mask = Mask(r.rows, r.cols, 0);
  if (r.nodata) {
    const float nd = static_cast<float>(*r.nodata);
    for (int i = 0; i < r.rows; ++i) {
      for (int j = 0; j < r.cols; ++j) {
        bool all = true;
        for (int b = 0; b < r.bands && all; ++b) all = is_nodata(r.at(b, i, j), nd);
        r.nodata_mask(i, j) = all ? 1 : 0;
      }
    }
  }
  return r;
}

void write_raster(const Raster& raster, const fs::path& path) {
  raster.validate();
  const fs::path stem = stem_of(path);
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());

  std::optional<double> nodata = raster.nodata;
  if (!nodata && count_true(raster.nodata_mask) > 0) nodata = kDefaultNodata;

  json h;
  h["rows"] = raster.rows;
  h["cols"] = raster.cols;
  h["bands"] = raster.bands;
  h["nodata"] = nodata ? json(*nodata) : json(nullptr);
  h["bbox"] = {raster.bbox.min_x, raster.bbox.min_y, raster.bbox.max_x, raster.bbox.max_y};
  h["gsd"] = raster.gsd;
  h["bands_meta"] = raster.band_names;

  std::vector<float> payload = raster.values;
  if (nodata) {
    const float nd = static_cast<float>(*nodata);
    for (int b = 0; b < raster.bands; ++b)
      for (int i = 0; i < raster.rows; ++i)
        for (int j = 0; j < raster.cols; ++j)
          if (raster.masked(i, j)) payload[raster.index(b, i, j)] = nd;
  }
  to_little_endian(payload);

  std::ofstream hout(with_suffix(stem, ".json"));
  if (!hout) throw Error("cannot write raster header for " + stem.string());
  hout << h.dump(2) << "\n";
  std::ofstream pout(with_suffix(stem, ".bin"), std::ios::binary);
  if (!pout) throw Error("cannot write raster payload for " + stem.string());
  pout.write(reinterpret_cast<const char*>(payload.data()),
             static_cast<std::streamsize>(payload.size() * sizeof(float)));
}

Raster clip_values(const Raster& raster, double lo, double hi) {
  if (!(lo < hi)) throw Error("clip_values: lo must be < hi");
  Raster out = raster;
  const float flo = static_cast<float>(lo);
  const float fhi = static_cast<float>(hi);
  for (auto& v : out.values) v = std::clamp(v, flo, fhi);
  return out;
}

}  // namespace plume
