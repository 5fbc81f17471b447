#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace firesr {

/// Plate-carree placement of a grid. The origin is the north-west corner of
/// the top-left pixel; rows run north to south.
struct GeoTransform {
  double origin_lon = 0.0;
  double origin_lat = 0.0;
  double pixel_size = 0.1;  // degrees per pixel, square pixels

  bool operator==(const GeoTransform&) const = default;
};

std::string describe(const GeoTransform& geo);

/// Single-channel 2D grid of reals, row-major, north-to-south rows.
class Raster {
 public:
  Raster(std::size_t width, std::size_t height, GeoTransform geo = {},
         std::optional<double> nodata = std::nullopt);
  Raster(std::size_t width, std::size_t height, std::vector<double> values,
         GeoTransform geo = {}, std::optional<double> nodata = std::nullopt);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }

  const GeoTransform& geo() const noexcept { return geo_; }
  void set_geo(const GeoTransform& geo);

  const std::optional<double>& nodata() const noexcept { return nodata_; }
  void set_nodata(std::optional<double> nodata) { nodata_ = nodata; }
  bool is_nodata(double v) const noexcept;

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  double& at(std::size_t row, std::size_t col) { return values_[row * width_ + col]; }
  double at(std::size_t row, std::size_t col) const { return values_[row * width_ + col]; }

  /// Throws DataError if any non-nodata value is NaN or infinite.
  void require_finite(std::string_view context) const;

  /// Copy with nodata pixels set to 0 and the nodata flag cleared.
  Raster with_nodata_zeroed(std::size_t* replaced = nullptr) const;

  double min() const;
  double max() const;
  double mean() const;

  bool same_grid(const Raster& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_ && geo_ == other.geo_;
  }

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<double> values_;
  GeoTransform geo_;
  std::optional<double> nodata_;
};

enum class ChannelRole { fire, temp_dev, burnable };

std::string_view to_string(ChannelRole role);
ChannelRole channel_role_from_string(std::string_view name);

/// Ordered set of co-registered rasters, each tagged with a distinct role.
class ChannelStack {
 public:
  ChannelStack(std::vector<Raster> channels, std::vector<ChannelRole> roles);

  std::size_t size() const noexcept { return channels_.size(); }
  std::size_t width() const noexcept { return channels_.front().width(); }
  std::size_t height() const noexcept { return channels_.front().height(); }

  const Raster& channel(std::size_t i) const { return channels_.at(i); }
  const Raster& channel(ChannelRole role) const;
  const std::vector<Raster>& channels() const noexcept { return channels_; }
  const std::vector<ChannelRole>& roles() const noexcept { return roles_; }

 private:
  std::vector<Raster> channels_;
  std::vector<ChannelRole> roles_;
};

/// The role order every FireSRnet input stack must have.
inline constexpr ChannelRole kInputRoles[] = {ChannelRole::fire, ChannelRole::temp_dev,
                                              ChannelRole::burnable};

}  // namespace firesr
