#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "json.hpp"

namespace tad {

/// Row-major dense matrix; rows are samples throughout the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Json = nlohmann::json;

enum class ErrorKind {
  kInvalidArgument,
  kParse,
  kNotFound,
  kIllegalState,
  kVersionMismatch,
  kCorrupted,
  kUnavailable,
  kNumerical,
};

std::string_view ToString(ErrorKind kind);

/// Library-wide exception. `details` carries structured context (line
/// numbers, surviving cluster hints) that the service layer forwards.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, Json details = Json::object())
      : std::runtime_error(message), kind_(kind), details_(std::move(details)) {}

  ErrorKind kind() const { return kind_; }
  const Json& details() const { return details_; }

 private:
  ErrorKind kind_;
  Json details_;
};

/// FNV-1a, 64-bit. Used for embedding hashes and artifact fingerprints.
constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline std::uint64_t Fnv1a(std::string_view bytes, std::uint64_t h = kFnvOffset) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::string HexDigest(std::uint64_t value);

/// Number of Unicode scalar values in a UTF-8 string (continuation bytes are
/// not counted).
std::size_t Utf8Length(std::string_view text);

/// Writes through a temporary sibling and renames it into place.
void WriteFileAtomic(const std::string& path, std::string_view content);
std::string ReadFile(const std::string& path);

/// UTC "YYYY-MM-DDTHH:MM:SSZ" for seconds since the epoch.
std::string FormatTimestamp(std::int64_t epoch_seconds);

/// Artifact timestamp: `explicit_value` when given, else SOURCE_DATE_EPOCH
/// when set, else the wall clock.
std::string ResolveCreatedAt(const std::string& explicit_value = {});

/// Uniform double in [0, 1) from 53 high bits; portable across standard
/// libraries unlike std::uniform_real_distribution.
template <typename Engine>
double UniformUnit(Engine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by rejection; portable across standard libraries.
template <typename Engine>
std::uint64_t UniformIndex(Engine& rng, std::uint64_t n) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

}  // namespace tad
