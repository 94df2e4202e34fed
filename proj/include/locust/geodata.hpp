#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "locust/common.hpp"
#include "locust/date.hpp"

namespace locust::geo {

constexpr float kDefaultNodata = -9999.0f;

// Plate-carree lon/lat grid. Row 0 is the northernmost row; pixel_size_lat
// is applied southward.
struct GeoTransform {
  double origin_lon = 0.0;
  double origin_lat = 0.0;
  double pixel_size_lon = 0.1;
  double pixel_size_lat = 0.1;
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;

  void validate() const;
};

struct PixelIndex {
  std::size_t row;
  std::size_t col;
};

struct LonLat {
  double lon;
  double lat;
};

// Floor-based cell lookup; throws OutOfBounds when the coordinate falls
// outside the raster footprint.
PixelIndex world_to_pixel(const GeoTransform& gt, double lon, double lat);

// Center of the cell.
LonLat pixel_to_world(const GeoTransform& gt, std::size_t row, std::size_t col);

// Odd n x n window, n = 2*half_width + 1.
struct Window {
  std::size_t center_row = 0;
  std::size_t center_col = 0;
  std::size_t half_width = 3;

  std::size_t side() const { return 2 * half_width + 1; }
};

// Gridded variable cube [variable][time][row][col]. Static stacks carry an
// empty timestamp list and a time extent of 1.
struct RasterStack {
  GeoTransform transform;
  std::vector<std::string> variables;
  std::vector<Date> timestamps;  // strictly increasing; empty for static
  std::vector<float> values;     // [var][time][row][col], row-major
  float nodata = kDefaultNodata;

  std::size_t n_vars() const { return variables.size(); }
  std::size_t n_times() const { return timestamps.empty() ? 1 : timestamps.size(); }

  std::size_t index(std::size_t v, std::size_t t, std::size_t r, std::size_t c) const {
    return ((v * n_times() + t) * transform.n_rows + r) * transform.n_cols + c;
  }
  float at(std::size_t v, std::size_t t, std::size_t r, std::size_t c) const {
    return values[index(v, t, r, c)];
  }
  float& at(std::size_t v, std::size_t t, std::size_t r, std::size_t c) {
    return values[index(v, t, r, c)];
  }

  // Throws unless extents, timestamp ordering and value finiteness all hold.
  void validate() const;

  // Index of the timestamp equal to d, or npos.
  std::size_t time_index(Date d) const;
};

// Window extract converted to time-major, variable-minor layout
// [time][n][n][variable]. Nodata cells pass through unchanged. Throws
// WindowClipped if any cell of the window leaves the raster.
struct WindowBlock {
  std::size_t n_times;
  std::size_t side;
  std::size_t n_vars;
  std::vector<float> values;  // [time][n][n][var]

  float at(std::size_t t, std::size_t i, std::size_t j, std::size_t v) const {
    return values[((t * side + i) * side + j) * n_vars + v];
  }
};

WindowBlock extract_window(const RasterStack& rs, const Window& w,
                           std::size_t time_begin, std::size_t time_end);

// LGRS container: ASCII header, little-endian f32 payload in
// [variable][time][row][col] order, trailing FNV-1a checksum of the payload
// bytes. write_stack . read_stack is the identity on the numeric payload.
void write_stack(const RasterStack& rs, const std::string& path);
RasterStack read_stack(const std::string& path);

}  // namespace locust::geo
