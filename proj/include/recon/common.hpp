#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace recon {

enum class ErrorCode {
  kInvalidArgument,
  kBadMagic,
  kTruncated,
  kDuplicateKey,
  kAllDropped,
  kNoObservedValues,
  kCoverageMismatch,
  kClassTooSmall,
  kSchemaMismatch,
  kRaggedRow,
  kMissingColumn,
  kKTooLarge,
  kFeatureCountTooLarge,
  kShapeMismatch,
  kDivergence,
  kOneClassOnly,
  kLengthMismatch,
  kBadRule,
  kRowSetMismatch,
  kEmptyMask,
  kIo,
  kInternal,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Microseconds since the Unix epoch. All window arithmetic is done in
// integer microseconds so boundaries are exact.
struct Timestamp {
  std::int64_t us = 0;

  static constexpr Timestamp from_parts(std::int64_t sec, std::int64_t usec) {
    return Timestamp{sec * 1'000'000 + usec};
  }
  static Timestamp from_seconds(double seconds);

  constexpr std::int64_t sec() const { return us / 1'000'000; }
  constexpr std::int64_t usec() const { return us % 1'000'000; }
  constexpr double seconds() const { return static_cast<double>(us) * 1e-6; }

  auto operator<=>(const Timestamp&) const = default;
};

std::int64_t seconds_to_us(double seconds);

struct Ipv4 {
  std::uint32_t value = 0;  // host byte order

  static Ipv4 parse(std::string_view dotted);
  std::string to_string() const;

  auto operator<=>(const Ipv4&) const = default;
};

}  // namespace recon
