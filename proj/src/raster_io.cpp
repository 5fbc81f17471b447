#include "firesr/raster_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "firesr/binary_io.hpp"
#include "firesr/error.hpp"

namespace firesr {

namespace binary {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error while reading '" + path + "'");
  return bytes;
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error while writing '" + path + "'");
}

}  // namespace binary

namespace {

constexpr std::string_view kMagic = "FSR1";

nlohmann::json nodata_to_json(const std::optional<double>& nodata) {
  if (!nodata) return nullptr;
  if (std::isnan(*nodata)) return "NaN";
  return static_cast<double>(static_cast<float>(*nodata));
}

std::optional<double> nodata_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  if (j.is_string() && j.get<std::string>() == "NaN") return std::numeric_limits<double>::quiet_NaN();
  if (j.is_number()) return j.get<double>();
  throw DataError("FSR header: 'nodata' must be a number, \"NaN\" or null");
}

}  // namespace

std::string encode_raster(const Raster& r) {
  nlohmann::json header = {
      {"width", r.width()},
      {"height", r.height()},
      {"pixel_size", r.geo().pixel_size},
      {"origin_lon", r.geo().origin_lon},
      {"origin_lat", r.geo().origin_lat},
      {"dtype", "f32"},
  };
  if (r.nodata()) header["nodata"] = nodata_to_json(r.nodata());
  const std::string text = header.dump();

  std::string out;
  out.reserve(8 + text.size() + 4 * r.size());
  out.append(kMagic);
  binary::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.append(text);
  for (double v : r.values()) binary::put_f32(out, static_cast<float>(v));
  return out;
}

Raster decode_raster(std::string_view bytes) {
  binary::Reader in(bytes, "FSR raster");
  if (bytes.size() < 4) throw DataError("FSR raster: file too short for magic number");
  const auto magic = in.take(4);
  if (magic != kMagic) {
    if (magic.substr(0, 3) == "FSR") {
      throw DataError("FSR raster: unsupported format version '" + std::string(1, magic[3]) +
                      "' (this reader handles version 1)");
    }
    throw DataError("FSR raster: bad magic number (expected \"FSR1\")");
  }
  const std::uint32_t header_len = in.u32();
  if (header_len > in.remaining()) {
    throw DataError("FSR raster: header length " + std::to_string(header_len) +
                    " exceeds file size");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.take(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("FSR raster: malformed JSON header: ") + e.what());
  }

  std::size_t width = 0, height = 0;
  GeoTransform geo;
  std::optional<double> nodata;
  try {
    const std::string dtype = header.at("dtype").get<std::string>();
    if (dtype != "f32") throw DataError("FSR raster: unsupported dtype '" + dtype + "'");
    width = header.at("width").get<std::size_t>();
    height = header.at("height").get<std::size_t>();
    geo.pixel_size = header.at("pixel_size").get<double>();
    geo.origin_lon = header.at("origin_lon").get<double>();
    geo.origin_lat = header.at("origin_lat").get<double>();
    if (header.contains("nodata")) nodata = nodata_from_json(header["nodata"]);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("FSR raster: invalid header: ") + e.what());
  }

  const std::size_t expected = width * height * 4;
  if (in.remaining() != expected) {
    std::ostringstream os;
    os << "FSR raster: payload length mismatch: header declares " << width << "x" << height
       << " (" << expected << " bytes) but payload has " << in.remaining() << " bytes";
    throw DataError(os.str());
  }
  std::vector<double> values(width * height);
  for (double& v : values) v = static_cast<double>(in.f32());
  return Raster(width, height, std::move(values), geo, nodata);
}

void write_raster(const Raster& r, const std::string& path) {
  binary::write_file(path, encode_raster(r));
}

Raster read_raster(const std::string& path) {
  try {
    return decode_raster(binary::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string encode_pgm(const Raster& r) {
  std::string out = "P5\n" + std::to_string(r.width()) + " " + std::to_string(r.height()) +
                    "\n255\n";
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : r.values()) {
    if (r.is_nodata(v) || !std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (double v : r.values()) {
    unsigned char px = 0;
    if (r.is_nodata(v) || !std::isfinite(v)) {
      px = 0;
    } else if (!(hi > lo)) {
      px = 128;
    } else {
      px = static_cast<unsigned char>(std::lround(255.0 * (v - lo) / (hi - lo)));
    }
    out.push_back(static_cast<char>(px));
  }
  return out;
}

void write_pgm(const Raster& r, const std::string& path) { binary::write_file(path, encode_pgm(r)); }

namespace {

// Black -> red -> yellow -> white.
std::array<unsigned char, 3> heat(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const auto ch = [](double x) {
    return static_cast<unsigned char>(std::lround(255.0 * std::clamp(x, 0.0, 1.0)));
  };
  return {ch(3.0 * t), ch(3.0 * t - 1.0), ch(3.0 * t - 2.0)};
}

}  // namespace

void write_ppm_panels(const std::vector<Raster>& panels, const std::string& path) {
  if (panels.empty()) throw UsageError("write_ppm_panels: no panels");
  const std::size_t w = panels.front().width(), h = panels.front().height();
  for (const auto& p : panels) {
    if (p.width() != w || p.height() != h) {
      throw DataError("write_ppm_panels: all panels must share dimensions");
    }
  }
  constexpr std::size_t gutter = 2;
  const std::size_t total_w = panels.size() * w + (panels.size() - 1) * gutter;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : panels) {
    lo = std::min(lo, p.min());
    hi = std::max(hi, p.max());
  }
  std::string out = "P6\n" + std::to_string(total_w) + " " + std::to_string(h) + "\n255\n";
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t i = 0; i < panels.size(); ++i) {
      if (i > 0) out.append(3 * gutter, static_cast<char>(255));
      for (std::size_t c = 0; c < w; ++c) {
        const double t = hi > lo ? (panels[i].at(r, c) - lo) / (hi - lo) : 0.5;
        for (unsigned char b : heat(t)) out.push_back(static_cast<char>(b));
      }
    }
  }
  binary::write_file(path, out);
}

Raster read_csv_raster(const std::string& path, std::optional<std::size_t> width,
                       std::optional<std::size_t> height, GeoTransform geo) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  struct Cell {
    std::size_t row, col;
    double value;
  };
  std::vector<Cell> cells;
  std::string line;
  std::size_t line_no = 0;
  std::size_t max_row = 0, max_col = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    long long row = 0, col = 0;
    double value = 0.0;
    if (!(fields >> row >> col >> value)) {
      if (cells.empty() && line_no == 1) continue;  // header
      throw DataError(path + ":" + std::to_string(line_no) + ": expected row,col,value");
    }
    if (row < 0 || col < 0) {
      throw DataError(path + ":" + std::to_string(line_no) + ": negative row/col index");
    }
    cells.push_back({static_cast<std::size_t>(row), static_cast<std::size_t>(col), value});
    max_row = std::max(max_row, cells.back().row);
    max_col = std::max(max_col, cells.back().col);
  }
  if (cells.empty() && (!width || !height)) {
    throw DataError(path + ": no cells and no explicit dimensions");
  }
  const std::size_t w = width.value_or(max_col + 1);
  const std::size_t h = height.value_or(max_row + 1);
  Raster r(w, h, geo);
  for (const auto& c : cells) {
    if (c.row >= h || c.col >= w) {
      throw DataError(path + ": cell (" + std::to_string(c.row) + ", " + std::to_string(c.col) +
                      ") outside " + std::to_string(w) + "x" + std::to_string(h) + " grid");
    }
    r.at(c.row, c.col) = c.value;
  }
  r.require_finite(path);
  return r;
}

Raster read_raster_any(const std::string& path, GeoTransform csv_geo) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
    return read_csv_raster(path, std::nullopt, std::nullopt, csv_geo);
  }
  return read_raster(path);
}

}  // namespace firesr
