#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmtk/issues.hpp"

namespace mmtk {

struct SampleRecord;
enum class Mode;

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kNoThink = "<nothink>";

// Markers that introduce a final answer. Matching is case-insensitive.
std::vector<std::string> default_answer_markers();

enum class ResponseMode { Reason, Direct, Malformed };
std::string_view to_string(ResponseMode m);

struct ParsedResponse {
  ResponseMode mode = ResponseMode::Malformed;
  std::optional<std::string> think;
  std::string final;
  std::vector<LintIssue> issues;  // structural issues only
  std::string raw;                // the parsed text, verbatim
};

// Reason: "<think>" think "</think>\n" final; Direct: "<nothink>" final.
// Throws InputError when the record breaks its invariants.
std::string render_sample(const SampleRecord& rec);

// Same layout without validation, used to lint records that may be broken.
std::string render_unchecked(Mode mode, const std::optional<std::string>& think, std::string_view final);

ParsedResponse parse_transcript(std::string_view text,
                                const std::vector<std::string>& answer_markers = default_answer_markers());

struct AppliedFix {
  IssueCode code;
  bool applied = false;
  std::string detail;
};

struct RepairResult {
  std::string text;
  std::vector<AppliedFix> fixes;
};

// Moves an answer clause trapped inside the think block after "</think>".
// Anything else structural is reported as skipped and the text is returned
// unchanged.
RepairResult repair_transcript(const ParsedResponse& parsed,
                               const std::vector<std::string>& answer_markers = default_answer_markers());

// Start of the trailing answer clause inside text, or npos.
std::size_t find_answer_clause(std::string_view text, const std::vector<std::string>& answer_markers);

}  // namespace mmtk
