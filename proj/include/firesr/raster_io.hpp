#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "firesr/raster.hpp"

namespace firesr {

/// FSR raster container:
///   bytes 0-3    magic "FSR1"
///   bytes 4-7    little-endian u32 header length N
///   bytes 8..8+N UTF-8 JSON header {width, height, pixel_size, origin_lon,
///                origin_lat, nodata (optional), dtype: "f32"}
///   remainder    width*height little-endian f32, row-major, north row first
///
/// Values are stored at single precision, so a round trip is bit-exact for any
/// raster whose values are representable as float.
std::string encode_raster(const Raster& r);
Raster decode_raster(std::string_view bytes);

void write_raster(const Raster& r, const std::string& path);
Raster read_raster(const std::string& path);

/// Binary 8-bit PGM, min-max scaled. A constant raster maps to mid-gray (128).
std::string encode_pgm(const Raster& r);
void write_pgm(const Raster& r, const std::string& path);

/// Side-by-side colour panels sharing one min-max scale, separated by white gutters.
void write_ppm_panels(const std::vector<Raster>& panels, const std::string& path);

/// Reads "row,col,value" triples (optional header line, '#' comments).
/// Missing cells are 0. When width/height are not given they are inferred from
/// the largest row/col index.
Raster read_csv_raster(const std::string& path, std::optional<std::size_t> width = std::nullopt,
                       std::optional<std::size_t> height = std::nullopt,
                       GeoTransform geo = {});

/// Dispatches on extension: ".csv" goes through read_csv_raster, anything else
/// is read as FSR.
Raster read_raster_any(const std::string& path, GeoTransform csv_geo = {});

}  // namespace firesr
