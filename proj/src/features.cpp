#include "locust/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace locust::features {

void FeatureConfig::validate() const {
  if (history_days == 0 || history_days % 3 != 0) {
    throw Error(ErrorCode::ConfigInvalid, "history_days must be a positive multiple of 3");
  }
  if (chip_size == 0 || chip_size % 2 != 0) {
    throw Error(ErrorCode::ConfigInvalid, "chip_size must be a positive even number");
  }
  if (chip_periods == 0 || chip_period_days == 0) {
    throw Error(ErrorCode::ConfigInvalid, "chip periods must be positive");
  }
}

ResampleResult resample_3day_means(const std::vector<float>& daily, float nodata) {
  if (daily.empty() || daily.size() % 3 != 0) {
    throw Error(ErrorCode::ConfigInvalid,
                "daily series length " + std::to_string(daily.size()) + " not a multiple of 3");
  }
  ResampleResult res;
  std::size_t periods = daily.size() / 3;
  res.means.resize(periods);
  for (std::size_t p = 0; p < periods; ++p) {
    double acc = 0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      float v = daily[p * 3 + k];
      if (v == nodata) continue;
      acc += v;
      ++count;
    }
    if (count == 0) {
      if (!res.all_nodata_period) res.all_nodata_period = p;
      res.means[p] = 0.0;
    } else {
      res.means[p] = acc / double(count);
    }
  }
  return res;
}

namespace {

// Index range of the contiguous daily run [obs-h+1, obs] in the stack.
std::size_t history_start_index(const geo::RasterStack& rs, Date obs_date,
                                std::size_t history_days) {
  Date first = obs_date.add_days(-std::int64_t(history_days) + 1);
  std::size_t t0 = rs.time_index(first);
  if (t0 == std::size_t(-1) || t0 + history_days > rs.n_times()) {
    throw Error(ErrorCode::InsufficientHistory,
                "stack does not cover the " + std::to_string(history_days) +
                    "-day history ending " + obs_date.to_string());
  }
  for (std::size_t k = 0; k < history_days; ++k) {
    if (rs.timestamps[t0 + k] != first.add_days(std::int64_t(k))) {
      throw Error(ErrorCode::InsufficientHistory,
                  "stack timestamps are not daily over the history window ending " +
                      obs_date.to_string());
    }
  }
  return t0;
}

}  // namespace

TemporalBlock build_temporal_block(const curation::ObservationRecord& rec,
                                   const geo::RasterStack& temporal_stack,
                                   const FeatureConfig& cfg) {
  cfg.validate();
  geo::PixelIndex px = geo::world_to_pixel(temporal_stack.transform, rec.lon, rec.lat);
  std::size_t t0 = history_start_index(temporal_stack, rec.obs_date, cfg.history_days);
  geo::Window w{px.row, px.col, cfg.half_width};
  geo::WindowBlock raw = geo::extract_window(temporal_stack, w, t0, t0 + cfg.history_days);

  std::size_t n = cfg.window_side();
  std::size_t T = cfg.n_periods();
  std::size_t nv = temporal_stack.n_vars();

  TemporalBlock tb;
  tb.record_id = rec.id;
  tb.n_periods = T;
  tb.side = n;
  tb.n_vars = nv;
  tb.variable_names = temporal_stack.variables;
  tb.values.resize(T * n * n * nv);

  std::vector<float> series(cfg.history_days);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t v = 0; v < nv; ++v) {
        for (std::size_t d = 0; d < cfg.history_days; ++d) {
          series[d] = raw.at(d, i, j, v);
        }
        ResampleResult rr = resample_3day_means(series, temporal_stack.nodata);
        if (rr.all_nodata_period) {
          std::ostringstream os;
          os << "record " << rec.id << ": all-nodata 3-day period " << *rr.all_nodata_period
             << " at cell (" << i << "," << j << ") variable " << temporal_stack.variables[v];
          throw Error(ErrorCode::MissingTemporal, os.str());
        }
        for (std::size_t t = 0; t < T; ++t) {
          tb.values[((t * n + i) * n + j) * nv + v] = rr.means[t];
        }
      }
    }
  }
  return tb;
}

StaticBlock build_static_block(const curation::ObservationRecord& rec,
                               const geo::RasterStack& static_stack,
                               const FeatureConfig& cfg) {
  geo::PixelIndex px = geo::world_to_pixel(static_stack.transform, rec.lon, rec.lat);
  geo::Window w{px.row, px.col, cfg.half_width};
  geo::WindowBlock raw = geo::extract_window(static_stack, w, 0, 1);

  std::size_t n = cfg.window_side();
  std::size_t ns = static_stack.n_vars();
  StaticBlock sb;
  sb.record_id = rec.id;
  sb.side = n;
  sb.n_vars = ns;
  sb.variable_names = static_stack.variables;
  sb.values.resize(n * n * ns);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t v = 0; v < ns; ++v) {
        float val = raw.at(0, i, j, v);
        if (val == static_stack.nodata) {
          std::ostringstream os;
          os << "record " << rec.id << ": nodata at cell (" << i << "," << j << ") variable "
             << static_stack.variables[v];
          throw Error(ErrorCode::MissingStatic, os.str());
        }
        sb.values[(i * n + j) * ns + v] = val;
      }
    }
  }
  return sb;
}

FlatVector flatten_concat(const TemporalBlock& tb, const StaticBlock& sb) {
  FlatVector fv;
  fv.record_id = tb.record_id;
  fv.values.reserve(tb.values.size() + sb.values.size());
  fv.values.insert(fv.values.end(), tb.values.begin(), tb.values.end());
  fv.values.insert(fv.values.end(), sb.values.begin(), sb.values.end());
  return fv;
}

void unflatten(const FlatVector& flat, TemporalBlock& tb_out, StaticBlock& sb_out) {
  std::size_t nt = tb_out.n_periods * tb_out.side * tb_out.side * tb_out.n_vars;
  std::size_t ns = sb_out.side * sb_out.side * sb_out.n_vars;
  if (flat.values.size() != nt + ns) {
    throw Error(ErrorCode::ShapeMismatch,
                "flat length " + std::to_string(flat.values.size()) + " vs blocks " +
                    std::to_string(nt) + "+" + std::to_string(ns));
  }
  tb_out.values.assign(flat.values.begin(), flat.values.begin() + std::ptrdiff_t(nt));
  sb_out.values.assign(flat.values.begin() + std::ptrdiff_t(nt), flat.values.end());
}

Chip build_chip(const curation::ObservationRecord& rec, const geo::RasterStack& image_stack,
                const FeatureConfig& cfg) {
  cfg.validate();
  geo::PixelIndex px = geo::world_to_pixel(image_stack.transform, rec.lon, rec.lat);
  std::size_t half = cfg.chip_size / 2;
  const auto& gt = image_stack.transform;
  if (px.row < half || px.col < half || px.row + half > gt.n_rows || px.col + half > gt.n_cols) {
    std::ostringstream os;
    os << "record " << rec.id << ": " << cfg.chip_size << "x" << cfg.chip_size
       << " chip centered at (" << px.row << "," << px.col << ") leaves the raster";
    throw Error(ErrorCode::WindowClipped, os.str());
  }
  std::size_t r0 = px.row - half;
  std::size_t c0 = px.col - half;
  std::size_t H = cfg.chip_size, W = cfg.chip_size;
  std::size_t nb = image_stack.n_vars();

  // Period k (chronological) covers the 30-day span
  // [obs - (P-k)*days + 1, obs - (P-k-1)*days].
  std::vector<std::size_t> chosen(cfg.chip_periods);
  for (std::size_t k = 0; k < cfg.chip_periods; ++k) {
    std::int64_t days = std::int64_t(cfg.chip_period_days);
    Date lo = rec.obs_date.add_days(-std::int64_t(cfg.chip_periods - k) * days + 1);
    Date hi = rec.obs_date.add_days(-std::int64_t(cfg.chip_periods - k - 1) * days);
    std::size_t best = std::size_t(-1);
    std::size_t best_nodata = 0;
    for (std::size_t t = 0; t < image_stack.timestamps.size(); ++t) {
      Date d = image_stack.timestamps[t];
      if (d < lo || hi < d) continue;
      // Count nodata pixels inside the crop across all bands.
      std::size_t n_missing = 0;
      for (std::size_t b = 0; b < nb; ++b) {
        for (std::size_t i = 0; i < H; ++i) {
          const float* row = image_stack.values.data() +
                             image_stack.index(b, t, r0 + i, c0);
          for (std::size_t j = 0; j < W; ++j) {
            if (row[j] == image_stack.nodata) ++n_missing;
          }
        }
      }
      // Fewest nodata wins; ties go to the later date (scan order is
      // chronological, so >= keeps the latest).
      if (best == std::size_t(-1) || n_missing <= best_nodata) {
        best = t;
        best_nodata = n_missing;
      }
    }
    if (best == std::size_t(-1)) {
      std::ostringstream os;
      os << "record " << rec.id << ": no scene in period " << k << " ("
         << lo.to_string() << " to " << hi.to_string() << ")";
      throw Error(ErrorCode::MissingPeriod, os.str());
    }
    if (best_nodata > 0) {
      std::ostringstream os;
      os << "record " << rec.id << ": best scene of period " << k << " still has "
         << best_nodata << " nodata pixels in the crop";
      throw Error(ErrorCode::MissingPixels, os.str());
    }
    chosen[k] = best;
  }

  Chip chip;
  chip.record_id = rec.id;
  chip.n_periods = cfg.chip_periods;
  chip.n_bands = nb;
  chip.height = H;
  chip.width = W;
  chip.band_names = image_stack.variables;
  chip.values.resize(cfg.chip_periods * nb * H * W);
  for (std::size_t k = 0; k < cfg.chip_periods; ++k) {
    for (std::size_t b = 0; b < nb; ++b) {
      for (std::size_t i = 0; i < H; ++i) {
        const float* src = image_stack.values.data() +
                           image_stack.index(b, chosen[k], r0 + i, c0);
        double* dst = chip.values.data() + ((k * nb + b) * H + i) * W;
        for (std::size_t j = 0; j < W; ++j) dst[j] = src[j];
      }
    }
  }

  chip.mask.assign(H * W, -1);
  std::int64_t r = std::int64_t(cfg.label_radius_px);
  std::int64_t ci = std::int64_t(half), cj = std::int64_t(half);
  for (std::int64_t i = std::max<std::int64_t>(0, ci - r);
       i <= std::min<std::int64_t>(std::int64_t(H) - 1, ci + r); ++i) {
    for (std::int64_t j = std::max<std::int64_t>(0, cj - r);
         j <= std::min<std::int64_t>(std::int64_t(W) - 1, cj + r); ++j) {
      if ((i - ci) * (i - ci) + (j - cj) * (j - cj) <= r * r) {
        chip.mask[std::size_t(i) * W + std::size_t(j)] = std::int8_t(rec.label);
      }
    }
  }
  return chip;
}

// ---- datasets ----------------------------------------------------------------

std::vector<double> Dataset::flat(const Sample& s) const {
  std::vector<double> out;
  out.reserve(s.temporal.size() + s.static_values.size());
  out.insert(out.end(), s.temporal.begin(), s.temporal.end());
  out.insert(out.end(), s.static_values.begin(), s.static_values.end());
  return out;
}

namespace {

// Variable-minor layout [..., var].
void accumulate_stats(const std::vector<double>& values, std::size_t n_vars,
                      std::vector<double>& sum, std::vector<double>& sumsq,
                      std::vector<std::size_t>& count) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::size_t v = i % n_vars;
    sum[v] += values[i];
    sumsq[v] += values[i] * values[i];
    ++count[v];
  }
}

}  // namespace

NormStats compute_norm_stats(const Dataset& train) {
  NormStats st;
  auto finic = [](std::vector<double>& mean, std::vector<double>& stdv,
                  const std::vector<double>& sum, const std::vector<double>& sumsq,
                  const std::vector<std::size_t>& count) {
    mean.resize(sum.size());
    stdv.resize(sum.size());
    for (std::size_t v = 0; v < sum.size(); ++v) {
      double m = count[v] ? sum[v] / double(count[v]) : 0.0;
      double var = count[v] ? sumsq[v] / double(count[v]) - m * m : 0.0;
      mean[v] = m;
      stdv[v] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
  };

  if (train.mode == FeatureMode::rs) {
    std::size_t nv = train.shapes.n_temporal_vars;
    std::size_t ns = train.shapes.n_static_vars;
    std::vector<double> tsum(nv, 0), tsq(nv, 0), ssum(ns, 0), ssq(ns, 0);
    std::vector<std::size_t> tcount(nv, 0), scount(ns, 0);
    for (const Sample& s : train.samples) {
      accumulate_stats(s.temporal, nv, true, tsum, tsq, tcount);
      accumulate_stats(s.static_values, ns, true, ssum, ssq, scount);
    }
    finic(st.temporal_mean, st.temporal_std, tsum, tsq, tcount);
    finic(st.static_mean, st.static_std, ssum, ssq, scount);
  } else {
    std::size_t nb = train.shapes.n_bands;
    std::size_t plane = train.shapes.chip_h * train.shapes.chip_w;
    std::vector<double> bsum(nb, 0), bsq(nb, 0);
    std::vector<std::size_t> bcount(nb, 0);
    for (const Sample& s : train.samples) {
      for (std::size_t t = 0; t < train.shapes.chip_periods; ++t) {
        for (std::size_t b = 0; b < nb; ++b) {
          const double* p = s.chip.data() + (t * nb + b) * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            bsum[b] += p[i];
            bsq[b] += p[i] * p[i];
            ++bcount[b];
          }
        }
      }
    }
    finic(st.chip_mean, st.chip_std, bsum, bsq, bcount);
  }
  return st;
}

void normalize_temporal(std::vector<double>& values, std::size_t n_vars, const NormStats& s) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::size_t v = i % n_vars;
    values[i] = (values[i] - s.temporal_mean[v]) / s.temporal_std[v];
  }
}

void normalize_static(std::vector<double>& values, std::size_t n_vars, const NormStats& s) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::size_t v = i % n_vars;
    values[i] = (values[i] - s.static_mean[v]) / s.static_std[v];
  }
}

void normalize_chip(std::vector<double>& values, std::size_t n_bands, std::size_t plane,
                    const NormStats& s) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::size_t b = (i / plane) % n_bands;
    values[i] = (values[i] - s.chip_mean[b]) / s.chip_std[b];
  }
}

void apply_normalization(Dataset& ds, const NormStats& stats) {
  if (ds.mode == FeatureMode::rs) {
    for (Sample& s : ds.samples) {
      normalize_temporal(s.temporal, ds.shapes.n_temporal_vars, stats);
      normalize_static(s.static_values, ds.shapes.n_static_vars, stats);
    }
  } else {
    std::size_t plane = ds.shapes.chip_h * ds.shapes.chip_w;
    for (Sample& s : ds.samples) {
      normalize_chip(s.chip, ds.shapes.n_bands, plane, stats);
    }
  }
}

// ---- .lft I/O -------------------------------------------------------------

namespace {

void put_u64_le(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64_le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_lft(const Dataset& ds, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path);

  std::size_t per_sample = ds.mode == FeatureMode::rs
                               ? ds.shapes.temporal_numel() + ds.shapes.static_numel()
                               : ds.shapes.chip_numel() + ds.shapes.mask_numel();

  std::ostringstream hdr;
  hdr << "LFT1\n";
  hdr << "mode: " << (ds.mode == FeatureMode::rs ? "rs" : "chip") << "\n";
  if (ds.mode == FeatureMode::rs) {
    hdr << "temporal_shape: " << ds.shapes.n_periods << "," << ds.shapes.side << ","
        << ds.shapes.side << "," << ds.shapes.n_temporal_vars << "\n";
    hdr << "static_shape: " << ds.shapes.side << "," << ds.shapes.side << ","
        << ds.shapes.n_static_vars << "\n";
  } else {
    hdr << "chip_shape: " << ds.shapes.chip_periods << "," << ds.shapes.n_bands << ","
        << ds.shapes.chip_h << "," << ds.shapes.chip_w << "\n";
  }
  hdr << "samples: " << ds.samples.size() << "\n";
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    hdr << "sample: " << ds.samples[i].id << " " << i * per_sample * sizeof(double) << " "
        << ds.samples[i].label << "\n";
  }
  hdr << "\n";
  f << hdr.str();

  std::uint64_t checksum = 14695981039346656037ULL;
  auto emit = [&](const double* p, std::size_t len) {
    f.write(reinterpret_cast<const char*>(p), std::streamsize(len * sizeof(double)));
    checksum = fnv1a64(p, len * sizeof(double), checksum);
  };
  for (const Sample& s : ds.samples) {
    if (ds.mode == FeatureMode::rs) {
      emit(s.temporal.data(), s.temporal.size());
      emit(s.static_values.data(), s.static_values.size());
    } else {
      emit(s.chip.data(), s.chip.size());
      std::vector<double> m(s.mask.size());
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = double(s.mask[i]);
      emit(m.data(), m.size());
    }
  }
  put_u64_le(f, checksum);
  if (!f) throw Error(ErrorCode::IoError, "short write to " + path);
}

Dataset read_lft(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != "LFT1") {
    throw Error(ErrorCode::MalformedHeader, path + ": missing LFT1 magic");
  }

  Dataset ds;
  std::vector<std::tuple<std::string, std::size_t, int>> index;
  bool saw_samples = false;
  std::size_t declared = 0;
  auto parse_dims = [&](const std::string& v, std::size_t* out, std::size_t k) {
    std::stringstream ss(v);
    std::string tok;
    for (std::size_t i = 0; i < k; ++i) {
      if (!std::getline(ss, tok, ',')) {
        throw Error(ErrorCode::MalformedHeader, path + ": bad shape '" + v + "'");
      }
      out[i] = std::stoul(tok);
    }
  };
  while (std::getline(f, line)) {
    if (line.empty()) break;
    auto colon = line.find(": ");
    if (colon == std::string::npos) {
      throw Error(ErrorCode::MalformedHeader, path + ": bad header line '" + line + "'");
    }
    std::string key = line.substr(0, colon);
    std::string value = line.substr(colon + 2);
    if (key == "mode") {
      if (value == "rs") ds.mode = FeatureMode::rs;
      else if (value == "chip") ds.mode = FeatureMode::chip;
      else throw Error(ErrorCode::MalformedHeader, path + ": unknown mode '" + value + "'");
    } else if (key == "temporal_shape") {
      std::size_t d[4];
      parse_dims(value, d, 4);
      ds.shapes.n_periods = d[0];
      ds.shapes.side = d[1];
      ds.shapes.n_temporal_vars = d[3];
    } else if (key == "static_shape") {
      std::size_t d[3];
      parse_dims(value, d, 3);
      ds.shapes.n_static_vars = d[2];
    } else if (key == "chip_shape") {
      std::size_t d[4];
      parse_dims(value, d, 4);
      ds.shapes.chip_periods = d[0];
      ds.shapes.n_bands = d[1];
      ds.shapes.chip_h = d[2];
      ds.shapes.chip_w = d[3];
    } else if (key == "samples") {
      declared = std::stoul(value);
      saw_samples = true;
    } else if (key == "sample") {
      std::stringstream ss(value);
      std::string id;
      std::size_t offset;
      int label;
      if (!(ss >> id >> offset >> label)) {
        throw Error(ErrorCode::MalformedHeader, path + ": bad sample line '" + value + "'");
      }
      index.emplace_back(id, offset, label);
    } else {
      throw Error(ErrorCode::MalformedHeader, path + ": unknown header key '" + key + "'");
    }
  }
  if (!saw_samples || index.size() != declared) {
    throw Error(ErrorCode::ExtentMismatch,
                path + ": declared " + std::to_string(declared) + " samples, index has " +
                    std::to_string(index.size()));
  }

  std::size_t per_sample = ds.mode == FeatureMode::rs
                               ? ds.shapes.temporal_numel() + ds.shapes.static_numel()
                               : ds.shapes.chip_numel() + ds.shapes.mask_numel();
  std::vector<double> payload(per_sample * index.size());
  f.read(reinterpret_cast<char*>(payload.data()),
         std::streamsize(payload.size() * sizeof(double)));
  if (std::size_t(f.gcount()) != payload.size() * sizeof(double)) {
    throw Error(ErrorCode::ExtentMismatch, path + ": payload truncated");
  }
  std::uint64_t stored = get_u64_le(f);
  if (!f) throw Error(ErrorCode::ExtentMismatch, path + ": checksum missing");
  if (stored != fnv1a64(payload.data(), payload.size() * sizeof(double))) {
    throw Error(ErrorCode::ChecksumMismatch, path + ": payload checksum mismatch");
  }

  ds.samples.resize(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    auto& [id, offset, label] = index[i];
    if (offset != i * per_sample * sizeof(double)) {
      throw Error(ErrorCode::ExtentMismatch, path + ": sample offset out of order");
    }
    Sample& s = ds.samples[i];
    s.id = id;
    s.label = label;
    const double* base = payload.data() + i * per_sample;
    if (ds.mode == FeatureMode::rs) {
      s.temporal.assign(base, base + ds.shapes.temporal_numel());
      s.static_values.assign(base + ds.shapes.temporal_numel(), base + per_sample);
    } else {
      s.chip.assign(base, base + ds.shapes.chip_numel());
      s.mask.resize(ds.shapes.mask_numel());
      const double* mp = base + ds.shapes.chip_numel();
      for (std::size_t k = 0; k < s.mask.size(); ++k) s.mask[k] = std::int8_t(mp[k]);
    }
  }
  return ds;
}

}  // namespace locust::features
