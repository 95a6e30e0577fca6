#include "mmtk/issues.hpp"

#include <array>
#include <utility>

namespace mmtk {

namespace {

struct CodeInfo {
  IssueCode code;
  std::string_view name;
  Severity severity;
  bool fixable;
  bool structural;
};

// Fixable codes must have a fixer in fix_record / repair_transcript.
constexpr std::array<CodeInfo, 11> kCodes{{
    {IssueCode::MisspelledImageTag, "misspelled_image_tag", Severity::Error, true, false},
    {IssueCode::AnswerInThink, "answer_in_think", Severity::Error, true, true},
    {IssueCode::CoordOutOfRange, "coord_out_of_range", Severity::Error, true, false},
    {IssueCode::FormatMismatch, "format_mismatch", Severity::Warning, false, false},
    {IssueCode::EmptyAnswer, "empty_answer", Severity::Error, false, true},
    {IssueCode::DanglingImageRef, "dangling_image_ref", Severity::Error, false, false},
    {IssueCode::UnclosedThink, "unclosed_think", Severity::Error, false, true},
    {IssueCode::MissingModeToken, "missing_mode_token", Severity::Error, false, true},
    {IssueCode::ConflictingModeTokens, "conflicting_mode_tokens", Severity::Error, false, true},
    {IssueCode::TextBeforeModeToken, "text_before_mode_token", Severity::Error, false, true},
    {IssueCode::ModeMismatch, "mode_mismatch", Severity::Error, false, true},
}};

const CodeInfo& info(IssueCode c) {
  for (const auto& i : kCodes) {
    if (i.code == c) return i;
  }
  return kCodes[0];
}

}  // namespace

std::string_view to_string(IssueCode c) { return info(c).name; }

std::optional<IssueCode> parse_issue_code(std::string_view s) {
  for (const auto& i : kCodes) {
    if (i.name == s) return i.code;
  }
  return std::nullopt;
}

std::string_view to_string(Severity s) { return s == Severity::Error ? "error" : "warning"; }

Severity default_severity(IssueCode c) { return info(c).severity; }
bool is_fixable(IssueCode c) { return info(c).fixable; }
bool is_structural(IssueCode c) { return info(c).structural; }

}  // namespace mmtk
