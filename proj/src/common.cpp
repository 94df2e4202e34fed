#include "locust/common.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace locust {

const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::OutOfBounds: return "out-of-bounds";
    case ErrorCode::WindowClipped: return "window-clipped";
    case ErrorCode::MalformedHeader: return "malformed-header";
    case ErrorCode::ExtentMismatch: return "extent-mismatch";
    case ErrorCode::ChecksumMismatch: return "checksum-mismatch";
    case ErrorCode::InsufficientHistory: return "insufficient-history";
    case ErrorCode::MissingPeriod: return "missing-period";
    case ErrorCode::MissingTemporal: return "missing-temporal";
    case ErrorCode::MissingStatic: return "missing-static";
    case ErrorCode::MissingPixels: return "missing-pixels";
    case ErrorCode::EmptyMask: return "empty-mask";
    case ErrorCode::Feasibility: return "feasibility";
    case ErrorCode::ShapeMismatch: return "shape-mismatch";
    case ErrorCode::MissingColumn: return "missing-column";
    case ErrorCode::DuplicateId: return "duplicate-id";
    case ErrorCode::ConfigInvalid: return "config-invalid";
    case ErrorCode::Divergence: return "divergence";
    case ErrorCode::IoError: return "io-error";
  }
  return "unknown";
}

std::string format_shape(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::uint64_t h = 14695981039346656037ULL;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof(buf));
    std::streamsize got = f.gcount();
    if (got > 0) h = fnv1a64(buf, static_cast<std::size_t>(got), h);
  }
  return h;
}

}  // namespace locust
