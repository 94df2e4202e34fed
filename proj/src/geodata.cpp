#include "locust/geodata.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace locust::geo {

namespace {

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

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

void GeoTransform::validate() const {
  if (pixel_size_lon <= 0 || pixel_size_lat <= 0) {
    throw Error(ErrorCode::ConfigInvalid, "pixel sizes must be positive");
  }
  if (n_rows < 1 || n_cols < 1) {
    throw Error(ErrorCode::ConfigInvalid, "raster extents must be >= 1");
  }
}

PixelIndex world_to_pixel(const GeoTransform& gt, double lon, double lat) {
  gt.validate();
  double fx = (lon - gt.origin_lon) / gt.pixel_size_lon;
  double fy = (gt.origin_lat - lat) / gt.pixel_size_lat;
  double col = std::floor(fx);
  double row = std::floor(fy);
  if (col < 0 || row < 0 || col >= double(gt.n_cols) || row >= double(gt.n_rows)) {
    std::ostringstream os;
    os << "coordinate (" << lon << "," << lat << ") outside raster footprint";
    throw Error(ErrorCode::OutOfBounds, os.str());
  }
  return {static_cast<std::size_t>(row), static_cast<std::size_t>(col)};
}

LonLat pixel_to_world(const GeoTransform& gt, std::size_t row, std::size_t col) {
  return {gt.origin_lon + (double(col) + 0.5) * gt.pixel_size_lon,
          gt.origin_lat - (double(row) + 0.5) * gt.pixel_size_lat};
}

void RasterStack::validate() const {
  transform.validate();
  if (variables.empty()) {
    throw Error(ErrorCode::ExtentMismatch, "stack has no variables");
  }
  std::size_t expect = n_vars() * n_times() * transform.n_rows * transform.n_cols;
  if (values.size() != expect) {
    std::ostringstream os;
    os << "payload holds " << values.size() << " values, extents demand " << expect;
    throw Error(ErrorCode::ExtentMismatch, os.str());
  }
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (!(timestamps[i - 1] < timestamps[i])) {
      throw Error(ErrorCode::MalformedHeader, "timestamps not strictly increasing");
    }
  }
  for (float v : values) {
    if (!std::isfinite(v) && v != nodata) {
      throw Error(ErrorCode::ExtentMismatch, "non-finite value that is not the nodata sentinel");
    }
  }
}

std::size_t RasterStack::time_index(Date d) const {
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    if (timestamps[i] == d) return i;
  }
  return static_cast<std::size_t>(-1);
}

WindowBlock extract_window(const RasterStack& rs, const Window& w,
                           std::size_t time_begin, std::size_t time_end) {
  std::size_t n = w.side();
  std::size_t hw = w.half_width;
  if (time_end > rs.n_times() || time_begin >= time_end) {
    throw Error(ErrorCode::ExtentMismatch, "time slice outside stack timestamps");
  }
  if (w.center_row < hw || w.center_col < hw ||
      w.center_row + hw >= rs.transform.n_rows ||
      w.center_col + hw >= rs.transform.n_cols) {
    std::ostringstream os;
    os << "window center (" << w.center_row << "," << w.center_col
       << ") half_width " << hw << " leaves the raster";
    throw Error(ErrorCode::WindowClipped, os.str());
  }

  WindowBlock out;
  out.n_times = time_end - time_begin;
  out.side = n;
  out.n_vars = rs.n_vars();
  out.values.resize(out.n_times * n * n * out.n_vars);
  std::size_t r0 = w.center_row - hw;
  std::size_t c0 = w.center_col - hw;
  for (std::size_t t = 0; t < out.n_times; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t v = 0; v < out.n_vars; ++v) {
          out.values[((t * n + i) * n + j) * out.n_vars + v] =
              rs.at(v, time_begin + t, r0 + i, c0 + j);
        }
      }
    }
  }
  return out;
}

void write_stack(const RasterStack& rs, const std::string& path) {
  rs.validate();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path);

  std::vector<std::string> stamps;
  stamps.reserve(rs.timestamps.size());
  for (const Date& d : rs.timestamps) stamps.push_back(d.to_string());

  std::ostringstream hdr;
  hdr.precision(17);
  hdr << "LGRS1\n";
  hdr << "origin_lon: " << rs.transform.origin_lon << "\n";
  hdr << "origin_lat: " << rs.transform.origin_lat << "\n";
  hdr << "pixel_size_lon: " << rs.transform.pixel_size_lon << "\n";
  hdr << "pixel_size_lat: " << rs.transform.pixel_size_lat << "\n";
  hdr << "n_rows: " << rs.transform.n_rows << "\n";
  hdr << "n_cols: " << rs.transform.n_cols << "\n";
  hdr << "variables: " << join(rs.variables, ',') << "\n";
  hdr << "timestamps: " << join(stamps, ',') << "\n";
  hdr << "nodata: " << rs.nodata << "\n";
  hdr << "count: " << rs.values.size() << "\n";
  hdr << "\n";
  f << hdr.str();

  // f32 payload is stored as raw bytes; this code assumes a little-endian
  // host, as does every platform this runs on.
  const char* payload = reinterpret_cast<const char*>(rs.values.data());
  std::size_t payload_bytes = rs.values.size() * sizeof(float);
  f.write(payload, std::streamsize(payload_bytes));
  put_u64_le(f, fnv1a64(payload, payload_bytes));
  if (!f) throw Error(ErrorCode::IoError, "short write to " + path);
}

RasterStack read_stack(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);

  std::string line;
  if (!std::getline(f, line) || line != "LGRS1") {
    throw Error(ErrorCode::MalformedHeader, path + ": missing LGRS1 magic");
  }

  RasterStack rs;
  std::size_t declared_count = 0;
  bool saw_count = false;
  while (std::getline(f, line)) {
    if (line.empty()) break;
    auto colon = line.find(": ");
    std::string key, value;
    if (colon == std::string::npos) {
      // "key:" with empty value (static stacks have an empty timestamp list)
      if (!line.empty() && line.back() == ':') {
        key = line.substr(0, line.size() - 1);
      } else {
        throw Error(ErrorCode::MalformedHeader, path + ": bad header line '" + line + "'");
      }
    } else {
      key = line.substr(0, colon);
      value = line.substr(colon + 2);
    }
    try {
      if (key == "origin_lon") rs.transform.origin_lon = std::stod(value);
      else if (key == "origin_lat") rs.transform.origin_lat = std::stod(value);
      else if (key == "pixel_size_lon") rs.transform.pixel_size_lon = std::stod(value);
      else if (key == "pixel_size_lat") rs.transform.pixel_size_lat = std::stod(value);
      else if (key == "n_rows") rs.transform.n_rows = std::stoul(value);
      else if (key == "n_cols") rs.transform.n_cols = std::stoul(value);
      else if (key == "variables") rs.variables = split(value, ',');
      else if (key == "timestamps") {
        if (!value.empty()) {
          for (const std::string& s : split(value, ',')) {
            rs.timestamps.push_back(Date::parse(s));
          }
        }
      } else if (key == "nodata") rs.nodata = std::stof(value);
      else if (key == "count") {
        declared_count = std::stoul(value);
        saw_count = true;
      } else {
        throw Error(ErrorCode::MalformedHeader, path + ": unknown header key '" + key + "'");
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw Error(ErrorCode::MalformedHeader, path + ": bad value for '" + key + "'");
    }
  }
  if (!saw_count) {
    throw Error(ErrorCode::MalformedHeader, path + ": header missing count");
  }

  std::size_t expect = rs.n_vars() * rs.n_times() * rs.transform.n_rows * rs.transform.n_cols;
  if (declared_count != expect) {
    std::ostringstream os;
    os << path << ": declared count " << declared_count
       << " disagrees with extents (" << expect << ")";
    throw Error(ErrorCode::ExtentMismatch, os.str());
  }

  rs.values.resize(declared_count);
  f.read(reinterpret_cast<char*>(rs.values.data()),
         std::streamsize(declared_count * sizeof(float)));
  if (std::size_t(f.gcount()) != declared_count * sizeof(float)) {
    std::ostringstream os;
    os << path << ": payload truncated (" << f.gcount() << " bytes of "
       << declared_count * sizeof(float) << ")";
    throw Error(ErrorCode::ExtentMismatch, os.str());
  }
  std::uint64_t stored = get_u64_le(f);
  if (!f) throw Error(ErrorCode::ExtentMismatch, path + ": checksum missing");
  std::uint64_t computed = fnv1a64(rs.values.data(), declared_count * sizeof(float));
  if (stored != computed) {
    throw Error(ErrorCode::ChecksumMismatch, path + ": payload checksum mismatch");
  }
  rs.validate();
  return rs;
}

}  // namespace locust::geo
