#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace semverd {

enum class Errc {
  DimensionMismatch,
  ZeroVector,
  EmptyText,
  ProviderUnavailable,
  InvalidEmbeddingFile,
  EmptySuite,
  MissingCapacity,
  NegativeRawValue,
  TraceTooShort,
  InvalidTrace,
  InvalidTolerance,
  InsufficientResponses,
  EmptyInput,
  BadGrid,
  EmptyMatrix,
  EmptySweep,
  InvalidThreshold,
  BadParams,
  ConfigInvalid,
  EmptyResult,
  ParseError,
};

inline std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::EmptyText: return "EmptyText";
    case Errc::ProviderUnavailable: return "ProviderUnavailable";
    case Errc::InvalidEmbeddingFile: return "InvalidEmbeddingFile";
    case Errc::EmptySuite: return "EmptySuite";
    case Errc::MissingCapacity: return "MissingCapacity";
    case Errc::NegativeRawValue: return "NegativeRawValue";
    case Errc::TraceTooShort: return "TraceTooShort";
    case Errc::InvalidTrace: return "InvalidTrace";
    case Errc::InvalidTolerance: return "InvalidTolerance";
    case Errc::InsufficientResponses: return "InsufficientResponses";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::BadGrid: return "BadGrid";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::EmptySweep: return "EmptySweep";
    case Errc::InvalidThreshold: return "InvalidThreshold";
    case Errc::BadParams: return "BadParams";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::EmptyResult: return "EmptyResult";
    case Errc::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable code. `index()` is set when the
/// failure belongs to one element of a batch (text, pair, record line).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what, std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(format(code, what, index)), code_(code), index_(index) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }
  [[nodiscard]] std::optional<std::size_t> index() const noexcept { return index_; }

  /// Same error re-tagged with a batch position.
  [[nodiscard]] Error at(std::size_t index) const {
    return Error(code_, detail_of(what()), index);
  }

 private:
  static std::string format(Errc code, const std::string& what, std::optional<std::size_t> index) {
    std::string out(errc_name(code));
    if (index) out += " at index " + std::to_string(*index);
    if (!what.empty()) out += ": " + what;
    return out;
  }

  static std::string detail_of(const std::string& formatted) {
    auto pos = formatted.find(": ");
    return pos == std::string::npos ? std::string{} : formatted.substr(pos + 2);
  }

  Errc code_;
  std::optional<std::size_t> index_;
};

}  // namespace semverd
