#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lexshift {

enum class Errc {
  // configuration
  InvalidArgument,
  Config,
  MissingResource,
  Io,
  // data
  MalformedRow,
  UnknownPeriodLabel,
  EmptyCorpus,
  EmptyParagraph,
  EmptyPeriod,
  TargetNotFound,
  OutOfVocabulary,
  BadMagic,
  DimensionMismatch,
  TruncatedPayload,
  MissingVersion,
  UnresolvedAssignment,
  DuplicateRating,
  SchemaMismatch,
  LengthMismatch,
  // numeric
  EmptySample,
  AllZeros,
  ZeroVariance,
  InvalidCounts,
  Undefined,
  EmptyVocabulary,
  VocabTooSmall,
  TooFewPoints,
  SingleClass,
  NonFinite,
  TooFewRows,
  DegenerateFolds,
  Collinear,
  SingleGroup,
  NonConvergence,
};

enum class ErrorKind { config, data, numeric };

constexpr std::string_view errc_name(Errc c) noexcept {
  switch (c) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Config: return "Config";
    case Errc::MissingResource: return "MissingResource";
    case Errc::Io: return "Io";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::UnknownPeriodLabel: return "UnknownPeriodLabel";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::EmptyParagraph: return "EmptyParagraph";
    case Errc::EmptyPeriod: return "EmptyPeriod";
    case Errc::TargetNotFound: return "TargetNotFound";
    case Errc::OutOfVocabulary: return "OutOfVocabulary";
    case Errc::BadMagic: return "BadMagic";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::TruncatedPayload: return "TruncatedPayload";
    case Errc::MissingVersion: return "MissingVersion";
    case Errc::UnresolvedAssignment: return "UnresolvedAssignment";
    case Errc::DuplicateRating: return "DuplicateRating";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptySample: return "EmptySample";
    case Errc::AllZeros: return "AllZeros";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::InvalidCounts: return "InvalidCounts";
    case Errc::Undefined: return "Undefined";
    case Errc::EmptyVocabulary: return "EmptyVocabulary";
    case Errc::VocabTooSmall: return "VocabTooSmall";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::SingleClass: return "SingleClass";
    case Errc::NonFinite: return "NonFinite";
    case Errc::TooFewRows: return "TooFewRows";
    case Errc::DegenerateFolds: return "DegenerateFolds";
    case Errc::Collinear: return "Collinear";
    case Errc::SingleGroup: return "SingleGroup";
    case Errc::NonConvergence: return "NonConvergence";
  }
  return "Unknown";
}

constexpr ErrorKind errc_kind(Errc c) noexcept {
  switch (c) {
    case Errc::InvalidArgument:
    case Errc::Config:
    case Errc::MissingResource:
    case Errc::Io:
      return ErrorKind::config;
    case Errc::EmptySample:
    case Errc::AllZeros:
    case Errc::ZeroVariance:
    case Errc::InvalidCounts:
    case Errc::Undefined:
    case Errc::EmptyVocabulary:
    case Errc::VocabTooSmall:
    case Errc::TooFewPoints:
    case Errc::SingleClass:
    case Errc::NonFinite:
    case Errc::TooFewRows:
    case Errc::DegenerateFolds:
    case Errc::Collinear:
    case Errc::SingleGroup:
    case Errc::NonConvergence:
      return ErrorKind::numeric;
    default:
      return ErrorKind::data;
  }
}

/// Every module reports failures through this exception; `code()` identifies
/// the failure and `line()` is set for row-level parse errors.
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string message, std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(format(code, message, line)),
        code_(code),
        detail_(std::move(message)),
        line_(line) {}

  Errc code() const noexcept { return code_; }
  ErrorKind kind() const noexcept { return errc_kind(code_); }
  const std::string& detail() const noexcept { return detail_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  static std::string format(Errc code, const std::string& msg, std::optional<std::size_t> line) {
    std::string out(errc_name(code));
    if (line) out += " (line " + std::to_string(*line) + ")";
    if (!msg.empty()) out += ": " + msg;
    return out;
  }

  Errc code_;
  std::string detail_;
  std::optional<std::size_t> line_;
};

}  // namespace lexshift
