#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "locust/curation.hpp"
#include "locust/geodata.hpp"

namespace locust::features {

struct FeatureConfig {
  std::size_t half_width = 3;      // window side n = 2*half_width + 1
  std::size_t history_days = 90;   // divisible by 3; T = history_days/3
  std::size_t chip_size = 224;     // chip side in pixels (even)
  std::size_t chip_periods = 3;
  std::size_t chip_period_days = 30;
  std::size_t label_radius_px = 8;
  bool normalize = true;

  std::size_t window_side() const { return 2 * half_width + 1; }
  std::size_t n_periods() const { return history_days / 3; }

  void validate() const;
};

struct TemporalBlock {
  std::string record_id;
  std::size_t n_periods, side, n_vars;
  std::vector<std::string> variable_names;
  std::vector<double> values;  // [T][n][n][v]

  double at(std::size_t t, std::size_t i, std::size_t j, std::size_t v) const {
    return values[((t * side + i) * side + j) * n_vars + v];
  }
};

struct StaticBlock {
  std::string record_id;
  std::size_t side, n_vars;
  std::vector<std::string> variable_names;
  std::vector<double> values;  // [n][n][s]

  double at(std::size_t i, std::size_t j, std::size_t v) const {
    return values[(i * side + j) * n_vars + v];
  }
};

struct Chip {
  std::string record_id;
  std::size_t n_periods, n_bands, height, width;
  std::vector<std::string> band_names;
  std::vector<double> values;       // [t][b][H][W]
  std::vector<std::int8_t> mask;    // [H][W]; 0/1 labels, -1 ignore

  double at(std::size_t t, std::size_t b, std::size_t i, std::size_t j) const {
    return values[((t * n_bands + b) * height + i) * width + j];
  }
};

struct FlatVector {
  std::string record_id;
  std::vector<double> values;  // temporal block then static block, row-major
};

// Chronological means over consecutive 3-day periods. Nodata days are left
// out of a period's mean; a period whose days are all nodata is reported so
// the caller can reject the sample.
struct ResampleResult {
  std::vector<double> means;
  std::optional<std::size_t> all_nodata_period;
};

ResampleResult resample_3day_means(const std::vector<float>& daily, float nodata);

// Builders throw Error with one of: OutOfBounds, WindowClipped,
// InsufficientHistory, MissingTemporal, MissingStatic, MissingPeriod,
// MissingPixels. The featurize pipeline maps those to per-record rejections.
TemporalBlock build_temporal_block(const curation::ObservationRecord& rec,
                                   const geo::RasterStack& temporal_stack,
                                   const FeatureConfig& cfg);

StaticBlock build_static_block(const curation::ObservationRecord& rec,
                               const geo::RasterStack& static_stack,
                               const FeatureConfig& cfg);

FlatVector flatten_concat(const TemporalBlock& tb, const StaticBlock& sb);

// Inverse of flatten_concat given the shape pair.
void unflatten(const FlatVector& flat, TemporalBlock& tb_out, StaticBlock& sb_out);

Chip build_chip(const curation::ObservationRecord& rec, const geo::RasterStack& image_stack,
                const FeatureConfig& cfg);

// ---- model-ready datasets ------------------------------------------------

enum class FeatureMode { rs, chip };

struct Sample {
  std::string id;
  int label = 0;
  std::vector<double> temporal;        // rs mode: [T][n][n][v]
  std::vector<double> static_values;   // rs mode: [n][n][s]
  std::vector<double> chip;            // chip mode: [t][b][H][W]
  std::vector<std::int8_t> mask;       // chip mode: [H][W]
};

struct DatasetShapes {
  // rs
  std::size_t n_periods = 30, side = 7, n_temporal_vars = 3, n_static_vars = 17;
  // chip
  std::size_t chip_periods = 3, n_bands = 6, chip_h = 224, chip_w = 224;

  std::size_t temporal_numel() const { return n_periods * side * side * n_temporal_vars; }
  std::size_t static_numel() const { return side * side * n_static_vars; }
  std::size_t flat_len() const { return temporal_numel() + static_numel(); }
  std::size_t chip_numel() const { return chip_periods * n_bands * chip_h * chip_w; }
  std::size_t mask_numel() const { return chip_h * chip_w; }
};

struct Dataset {
  FeatureMode mode = FeatureMode::rs;
  DatasetShapes shapes;
  std::vector<Sample> samples;

  std::vector<double> flat(const Sample& s) const;  // temporal ++ static
};

// Per-variable z-score statistics, computed on the train split only.
struct NormStats {
  std::vector<double> temporal_mean, temporal_std;
  std::vector<double> static_mean, static_std;
  std::vector<double> chip_mean, chip_std;  // per band
};

NormStats compute_norm_stats(const Dataset& train);
void apply_normalization(Dataset& ds, const NormStats& stats);
// Normalize a single raw block in place (used by map inference).
void normalize_temporal(std::vector<double>& values, std::size_t n_vars, const NormStats& s);
void normalize_static(std::vector<double>& values, std::size_t n_vars, const NormStats& s);
// values laid out [t][b][plane]; plane = H*W.
void normalize_chip(std::vector<double>& values, std::size_t n_bands, std::size_t plane,
                    const NormStats& s);

// ---- feature files ---------------------------------------------------------

// .lft: ASCII header (magic, shapes, per-sample index of id/offset/label)
// followed by a little-endian f64 payload and an FNV-1a checksum, like the
// raster container.
void write_lft(const Dataset& ds, const std::string& path);
Dataset read_lft(const std::string& path);

}  // namespace locust::features
