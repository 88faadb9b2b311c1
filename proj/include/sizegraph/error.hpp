#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sizegraph {

enum class ErrorCode {
  InvalidArgument,
  Io,
  Format,
  InsufficientEvents,
  RankTooLarge,
  DegenerateMatrix,
  DegenerateGraph,
  UnknownBrand,
  NoDirectEdge,
  NoPath,
  InsufficientData,
  UnknownPreference,
  NoCandidates,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
    case ErrorCode::InsufficientEvents: return "InsufficientEvents";
    case ErrorCode::RankTooLarge: return "RankTooLarge";
    case ErrorCode::DegenerateMatrix: return "DegenerateMatrix";
    case ErrorCode::DegenerateGraph: return "DegenerateGraph";
    case ErrorCode::UnknownBrand: return "UnknownBrand";
    case ErrorCode::NoDirectEdge: return "NoDirectEdge";
    case ErrorCode::NoPath: return "NoPath";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::UnknownPreference: return "UnknownPreference";
    case ErrorCode::NoCandidates: return "NoCandidates";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so the
/// CLI and server can map it onto exit codes / HTTP statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sizegraph
