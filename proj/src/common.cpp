#include "recon/common.hpp"

#include <charconv>
#include <cmath>

namespace recon {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kTruncated: return "Truncated";
    case ErrorCode::kDuplicateKey: return "DuplicateKey";
    case ErrorCode::kAllDropped: return "AllDropped";
    case ErrorCode::kNoObservedValues: return "NoObservedValues";
    case ErrorCode::kCoverageMismatch: return "CoverageMismatch";
    case ErrorCode::kClassTooSmall: return "ClassTooSmall";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kRaggedRow: return "RaggedRow";
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kKTooLarge: return "KTooLarge";
    case ErrorCode::kFeatureCountTooLarge: return "FeatureCountTooLarge";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kDivergence: return "Divergence";
    case ErrorCode::kOneClassOnly: return "OneClassOnly";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kBadRule: return "BadRule";
    case ErrorCode::kRowSetMismatch: return "RowSetMismatch";
    case ErrorCode::kEmptyMask: return "EmptyMask";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kInternal: return "Internal";
  }
  return "Unknown";
}

std::int64_t seconds_to_us(double seconds) { return std::llround(seconds * 1e6); }

Timestamp Timestamp::from_seconds(double seconds) { return Timestamp{seconds_to_us(seconds)}; }

Ipv4 Ipv4::parse(std::string_view dotted) {
  std::uint32_t value = 0;
  const char* p = dotted.data();
  const char* end = dotted.data() + dotted.size();
  for (int octet = 0; octet < 4; ++octet) {
    unsigned part = 0;
    auto [next, ec] = std::from_chars(p, end, part);
    if (ec != std::errc{} || part > 255 || next == p)
      throw Error(ErrorCode::kInvalidArgument, "bad IPv4 address '" + std::string(dotted) + "'");
    value = value << 8 | part;
    p = next;
    if (octet < 3) {
      if (p == end || *p != '.')
        throw Error(ErrorCode::kInvalidArgument, "bad IPv4 address '" + std::string(dotted) + "'");
      ++p;
    }
  }
  if (p != end) throw Error(ErrorCode::kInvalidArgument, "bad IPv4 address '" + std::string(dotted) + "'");
  return Ipv4{value};
}

std::string Ipv4::to_string() const {
  return std::to_string(value >> 24) + '.' + std::to_string((value >> 16) & 0xFF) + '.' +
         std::to_string((value >> 8) & 0xFF) + '.' + std::to_string(value & 0xFF);
}

}  // namespace recon
