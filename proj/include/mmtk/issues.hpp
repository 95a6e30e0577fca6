#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace mmtk {

enum class IssueCode {
  MisspelledImageTag,
  AnswerInThink,
  CoordOutOfRange,
  FormatMismatch,
  EmptyAnswer,
  DanglingImageRef,
  // transcript structure
  UnclosedThink,
  MissingModeToken,
  ConflictingModeTokens,
  TextBeforeModeToken,
  ModeMismatch,
};

enum class Severity { Error, Warning };

std::string_view to_string(IssueCode c);
std::optional<IssueCode> parse_issue_code(std::string_view s);
std::string_view to_string(Severity s);

Severity default_severity(IssueCode c);
bool is_fixable(IssueCode c);
// Issues that make a transcript Malformed.
bool is_structural(IssueCode c);

struct IssueLocation {
  std::string record_id;
  std::string field;
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct LintIssue {
  IssueCode code;
  IssueLocation location;
  Severity severity;
  bool fixable;
  std::string detail;

  static LintIssue make(IssueCode code, IssueLocation loc, std::string detail = {}) {
    return {code, std::move(loc), default_severity(code), is_fixable(code), std::move(detail)};
  }
};

}  // namespace mmtk
