#include "firesr/raster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "firesr/error.hpp"

namespace firesr {

std::string describe(const GeoTransform& geo) {
  std::ostringstream os;
  os.precision(17);
  os << "(origin_lon=" << geo.origin_lon << ", origin_lat=" << geo.origin_lat
     << ", pixel_size=" << geo.pixel_size << ")";
  return os.str();
}

namespace {

void check_shape(std::size_t width, std::size_t height, const GeoTransform& geo) {
  if (width == 0 || height == 0) {
    throw DataError("raster dimensions must be at least 1x1");
  }
  if (!(geo.pixel_size > 0.0) || !std::isfinite(geo.pixel_size)) {
    throw DataError("raster pixel_size must be positive and finite");
  }
}

}  // namespace

Raster::Raster(std::size_t width, std::size_t height, GeoTransform geo,
               std::optional<double> nodata)
    : width_(width), height_(height), geo_(geo), nodata_(nodata) {
  check_shape(width, height, geo);
  values_.assign(width * height, 0.0);
}

Raster::Raster(std::size_t width, std::size_t height, std::vector<double> values,
               GeoTransform geo, std::optional<double> nodata)
    : width_(width), height_(height), values_(std::move(values)), geo_(geo), nodata_(nodata) {
  check_shape(width, height, geo);
  if (values_.size() != width * height) {
    std::ostringstream os;
    os << "raster of " << width << "x" << height << " needs " << width * height
       << " values, got " << values_.size();
    throw DataError(os.str());
  }
}

void Raster::set_geo(const GeoTransform& geo) {
  check_shape(width_, height_, geo);
  geo_ = geo;
}

bool Raster::is_nodata(double v) const noexcept {
  if (!nodata_) return false;
  if (std::isnan(*nodata_)) return std::isnan(v);
  return v == *nodata_;
}

void Raster::require_finite(std::string_view context) const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double v = values_[i];
    if (!std::isfinite(v) && !is_nodata(v)) {
      std::ostringstream os;
      os << context << ": nonfinite value " << v << " at row " << i / width_ << ", col "
         << i % width_;
      throw DataError(os.str());
    }
  }
}

Raster Raster::with_nodata_zeroed(std::size_t* replaced) const {
  Raster out(width_, height_, values_, geo_);
  std::size_t n = 0;
  if (nodata_) {
    for (double& v : out.values_) {
      if (is_nodata(v)) {
        v = 0.0;
        ++n;
      }
    }
  }
  if (replaced) *replaced += n;
  return out;
}

double Raster::min() const { return *std::min_element(values_.begin(), values_.end()); }
double Raster::max() const { return *std::max_element(values_.begin(), values_.end()); }
double Raster::mean() const {
  return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(size());
}

std::string_view to_string(ChannelRole role) {
  switch (role) {
    case ChannelRole::fire: return "fire";
    case ChannelRole::temp_dev: return "temp_dev";
    case ChannelRole::burnable: return "burnable";
  }
  return "unknown";
}

ChannelRole channel_role_from_string(std::string_view name) {
  if (name == "fire") return ChannelRole::fire;
  if (name == "temp_dev") return ChannelRole::temp_dev;
  if (name == "burnable") return ChannelRole::burnable;
  throw DataError("unknown channel role '" + std::string(name) + "'");
}

ChannelStack::ChannelStack(std::vector<Raster> channels, std::vector<ChannelRole> roles)
    : channels_(std::move(channels)), roles_(std::move(roles)) {
  if (channels_.empty()) throw DataError("channel stack needs at least one channel");
  if (channels_.size() != roles_.size()) {
    throw DataError("channel stack: number of roles does not match number of channels");
  }
  for (std::size_t i = 0; i < roles_.size(); ++i) {
    for (std::size_t j = i + 1; j < roles_.size(); ++j) {
      if (roles_[i] == roles_[j]) {
        throw DataError("channel stack: duplicate role " + std::string(to_string(roles_[i])));
      }
    }
    if (!channels_[i].same_grid(channels_.front())) {
      throw DataError("channel stack: channel '" + std::string(to_string(roles_[i])) +
                      "' grid " + describe(channels_[i].geo()) + " " +
                      std::to_string(channels_[i].width()) + "x" +
                      std::to_string(channels_[i].height()) + " differs from " +
                      describe(channels_.front().geo()) + " " +
                      std::to_string(channels_.front().width()) + "x" +
                      std::to_string(channels_.front().height()));
    }
  }
}

const Raster& ChannelStack::channel(ChannelRole role) const {
  for (std::size_t i = 0; i < roles_.size(); ++i) {
    if (roles_[i] == role) return channels_[i];
  }
  throw DataError("channel stack has no '" + std::string(to_string(role)) + "' channel");
}

}  // namespace firesr
