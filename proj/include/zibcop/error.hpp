#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace zibcop {

enum class ErrorCode {
  Domain,
  InvalidArgument,
  NonFinite,
  TooFewNonzero,
  MutuallyExclusive,
  RankDeficientDesign,
  NonpositiveCurvature,
  GuardExhausted,
  Parse,
  DuplicateId,
  EmptyAfterFilter,
  NoOverlap,
  Io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Domain: return "domain";
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::NonFinite: return "non_finite";
    case ErrorCode::TooFewNonzero: return "too_few_nonzero";
    case ErrorCode::MutuallyExclusive: return "mutually_exclusive";
    case ErrorCode::RankDeficientDesign: return "rank_deficient_design";
    case ErrorCode::NonpositiveCurvature: return "nonpositive_curvature";
    case ErrorCode::GuardExhausted: return "guard_exhausted";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::DuplicateId: return "duplicate_id";
    case ErrorCode::EmptyAfterFilter: return "empty_after_filter";
    case ErrorCode::NoOverlap: return "no_overlap";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the pairwise pipeline, the CLI) can decide between skipping and
/// aborting without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const char* what) {
  if (!cond) throw Error(code, what);
}

}  // namespace zibcop
