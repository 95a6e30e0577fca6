#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmtk/issues.hpp"
#include "mmtk/judge.hpp"
#include "mmtk/record.hpp"
#include "mmtk/transcript.hpp"

namespace mmtk {

// ---------------------------------------------------------------------------
// Lint

struct LintOptions {
  // Tags accepted verbatim. Empty means: "<image>" plus "<image_1>".."<image_N>"
  // for the record's N images.
  std::vector<std::string> known_tags;
  std::vector<std::string> answer_markers = default_answer_markers();
  std::size_t max_tag_distance = 2;
};

std::vector<std::string> default_known_tags(const SampleRecord& rec);

// Pure: same record, same issues.
std::vector<LintIssue> lint_record(const SampleRecord& rec, const LintOptions& opts = {});

struct FixOutcome {
  SampleRecord record;
  std::vector<AppliedFix> fixes;
};

// Runs the registered fixer for every fixable issue. Unfixable issues are
// reported as skipped. The input record is not modified.
FixOutcome fix_record(const SampleRecord& rec, const std::vector<LintIssue>& issues, const LintOptions& opts = {});

// ---------------------------------------------------------------------------
// Dataset report

enum class QualityLabel { Excellent, GoodQWrongA, LowQualityQuestions, LowQualityImages, FormatErrors };
std::string_view to_string(QualityLabel l);

struct JudgeVerdict {
  std::string record_id;
  bool agrees = true;  // false: judge disagreed with the dataset's answer
};

struct LabelThresholds {
  double format_error_share = 0.20;
  double disagreement_share = 0.20;
};

struct IssueExcerpt {
  std::string record_id;
  IssueCode code;
  std::string excerpt;
};

struct DatasetReport {
  std::size_t record_count = 0;
  std::size_t records_with_fixable = 0;
  std::size_t disagreements = 0;
  std::map<std::string, std::size_t> histogram;  // issue code -> count
  std::optional<QualityLabel> suggestion;
  std::vector<LintIssue> evidence;  // capped sample backing the suggestion
  std::vector<IssueExcerpt> excerpts;
  std::vector<std::pair<std::string, std::size_t>> duplicate_images;  // ref, records sharing it

  std::size_t total_issues() const;
  nlohmann::ordered_json to_json() const;
};

// Incremental form so that corpora can be streamed.
class DatasetSummarizer {
 public:
  explicit DatasetSummarizer(LintOptions opts = {}, LabelThresholds thresholds = {}, std::size_t max_excerpts = 10);

  void add(const SampleRecord& rec);
  void add(const SampleRecord& rec, const std::vector<LintIssue>& issues);
  void add_verdict(const JudgeVerdict& v);
  DatasetReport finish() const;

 private:
  LintOptions opts_;
  LabelThresholds thresholds_;
  std::size_t max_excerpts_;
  DatasetReport report_;
  std::map<std::string, std::size_t> image_refs_;
};

DatasetReport summarize_dataset(const std::vector<SampleRecord>& records,
                                const std::vector<JudgeVerdict>& verdicts = {}, const LintOptions& opts = {},
                                const LabelThresholds& thresholds = {});

// ---------------------------------------------------------------------------
// Majority vote

using AnswerNormalizer = std::function<std::string(std::string_view)>;

// trim, case-fold, numeric canonicalization ("42.50 kg" -> "42.5").
std::string normalize_answer(std::string_view s);

struct VoteVerdict {
  bool verified = false;
  std::string answer;  // meaningful when verified
  double share = 0.0;  // winning class share
};

// Verified iff one normalized answer's share strictly exceeds threshold.
// threshold must lie in [0.5, 1.0].
VoteVerdict majority_vote(const std::vector<std::string>& candidates, const AnswerNormalizer& normalizer = normalize_answer,
                          double threshold = 0.5);

// ---------------------------------------------------------------------------
// Double-duty reformatting

enum class AnswerFormat { SingleWord, Json, Lowercase, NumberOnly, Sentence };
std::string_view to_string(AnswerFormat f);
std::optional<AnswerFormat> parse_answer_format(std::string_view s);

struct FormatTemplate {
  AnswerFormat format;
  std::vector<std::string> phrasings;  // one is drawn per record
};

std::vector<FormatTemplate> default_template_pool();

// The answer rewritten into `format`, or nullopt when it cannot be represented.
std::optional<std::string> apply_answer_format(AnswerFormat format, std::string_view answer);
// Whether an answer already satisfies `format`.
bool complies_with_format(AnswerFormat format, std::string_view answer);
// The format requested by instruction text, if any phrasing from the pool appears.
std::optional<AnswerFormat> detect_requested_format(std::string_view user_text,
                                                    const std::vector<FormatTemplate>& pool = default_template_pool());

struct TransformOutcome {
  std::optional<SampleRecord> record;
  std::string skip_reason;
};

TransformOutcome reformat_double_duty(const SampleRecord& rec, const std::vector<FormatTemplate>& pool,
                                      std::uint64_t seed);

// ---------------------------------------------------------------------------
// Judge regeneration

struct RegenerateOptions {
  std::size_t votes = 3;
  double threshold = 0.5;
  std::size_t attempts = 3;  // per call, transport failures only
  // Seed the request with a description prompt instead of the question.
  std::optional<std::string> description_prompt;
};

struct RegenerateOutcome {
  SampleRecord record;
  VoteVerdict verdict;
  bool excluded = false;
};

RegenerateOutcome regenerate_answer(const SampleRecord& rec, JudgeClient& judge, const RegenerateOptions& opts = {});

}  // namespace mmtk
