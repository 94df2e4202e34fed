#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace locust {

// Every failure mode the pipeline reports carries one of these codes so
// callers (and tests) can tell them apart without parsing messages.
enum class ErrorCode {
  OutOfBounds,
  WindowClipped,
  MalformedHeader,
  ExtentMismatch,
  ChecksumMismatch,
  InsufficientHistory,
  MissingPeriod,
  MissingTemporal,
  MissingStatic,
  MissingPixels,
  EmptyMask,
  Feasibility,
  ShapeMismatch,
  MissingColumn,
  DuplicateId,
  ConfigInvalid,
  Divergence,
  IoError,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

const char* error_code_name(ErrorCode c);

std::string format_shape(const std::vector<std::size_t>& shape);

// 64-bit FNV-1a over a byte range.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t seed = 14695981039346656037ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::string& path);

// RNG helpers. std::shuffle and the std distributions leave their exact
// output unspecified, so anything that must be reproducible byte-for-byte
// goes through these instead.
using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  return (rng() >> 11) * 0x1.0p-53;  // 53 random bits in [0,1)
}

inline double uniform_in(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Unbiased integer in [0, n) by rejection.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  if (n == 0) return 0;
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

template <typename T>
void shuffle_inplace(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_below(rng, i)]);
  }
}

}  // namespace locust
