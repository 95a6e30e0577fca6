#include "mmtk/transcript.hpp"

#include "mmtk/error.hpp"
#include "mmtk/record.hpp"
#include "mmtk/text.hpp"

namespace mmtk {

namespace {

LintIssue structural(IssueCode code, std::size_t begin, std::size_t end, std::string detail) {
  return LintIssue::make(code, {"", "transcript", begin, end}, std::move(detail));
}

// Flags protocol tokens in [from, text.size()) other than the expected ones.
bool has_stray_token(std::string_view text, std::size_t from) {
  const std::string_view rest = text.substr(from);
  return rest.find(kThinkOpen) != std::string_view::npos || rest.find(kThinkClose) != std::string_view::npos ||
         rest.find(kNoThink) != std::string_view::npos;
}

}  // namespace

std::vector<std::string> default_answer_markers() {
  return {"Final answer:", "Answer:", "\\boxed{"};
}

std::string_view to_string(ResponseMode m) {
  switch (m) {
    case ResponseMode::Reason: return "reason";
    case ResponseMode::Direct: return "direct";
    case ResponseMode::Malformed: return "malformed";
  }
  return "malformed";
}

std::string render_unchecked(Mode mode, const std::optional<std::string>& think, std::string_view final) {
  std::string out;
  if (mode == Mode::Reason) {
    out.reserve(kThinkOpen.size() + kThinkClose.size() + final.size() + (think ? think->size() : 0) + 1);
    out += kThinkOpen;
    if (think) out += *think;
    out += kThinkClose;
    out += '\n';
  } else {
    out += kNoThink;
  }
  out += final;
  return out;
}

std::string render_sample(const SampleRecord& rec) {
  rec.validate();
  return render_unchecked(rec.mode, rec.think, rec.final);
}

std::size_t find_answer_clause(std::string_view text, const std::vector<std::string>& answer_markers) {
  std::size_t best_start = std::string_view::npos;
  for (const auto& m : answer_markers) {
    const std::size_t at = text::rfind_icase(text, m);
    if (at != std::string_view::npos && (best_start == std::string_view::npos || at > best_start)) best_start = at;
  }
  if (best_start == std::string_view::npos) return best_start;
  // A longer marker may enclose the last one ("Final answer:" around "answer:").
  std::size_t start = best_start;
  for (const auto& m : answer_markers) {
    const std::size_t at = text::rfind_icase(text.substr(0, best_start + m.size()), m);
    if (at != std::string_view::npos && at < start && at + m.size() > best_start) start = at;
  }
  return start;
}

ParsedResponse parse_transcript(std::string_view text, const std::vector<std::string>& answer_markers) {
  ParsedResponse out;
  out.raw = std::string(text);

  const std::size_t open = text.find(kThinkOpen);
  const std::size_t nothink = text.find(kNoThink);
  const std::size_t lead = text.size() - text::ltrim(text).size();

  if (open == std::string_view::npos && nothink == std::string_view::npos) {
    out.final = std::string(text::trim(text));
    out.issues.push_back(structural(IssueCode::MissingModeToken, 0, text.size(), "no <think> or <nothink> token"));
    return out;
  }
  if (open != std::string_view::npos && nothink != std::string_view::npos) {
    out.issues.push_back(structural(IssueCode::ConflictingModeTokens, std::min(open, nothink),
                                    std::max(open, nothink), "both <think> and <nothink> present"));
  }

  const bool reason = nothink == std::string_view::npos || (open != std::string_view::npos && open < nothink);
  const std::size_t token_at = reason ? open : nothink;
  if (token_at > lead) {
    out.issues.push_back(structural(IssueCode::TextBeforeModeToken, lead, token_at, "text before the mode token"));
  }

  if (!reason) {
    const std::size_t body = nothink + kNoThink.size();
    if (open == std::string_view::npos && has_stray_token(text, body)) {
      out.issues.push_back(structural(IssueCode::ConflictingModeTokens, body, text.size(), "stray protocol token"));
    }
    out.final = std::string(text::ltrim(text.substr(body)));
    if (out.final.empty()) {
      out.issues.push_back(structural(IssueCode::EmptyAnswer, body, text.size(), "direct response has no answer"));
    }
    out.mode = out.issues.empty() ? ResponseMode::Direct : ResponseMode::Malformed;
    return out;
  }

  const std::size_t body = open + kThinkOpen.size();
  const std::size_t close = text.find(kThinkClose, body);
  if (close == std::string_view::npos) {
    out.think = std::string(text.substr(body));
    out.issues.push_back(structural(IssueCode::UnclosedThink, open, text.size(), "<think> is never closed"));
    out.mode = ResponseMode::Malformed;
    return out;
  }

  out.think = std::string(text.substr(body, close - body));
  const std::size_t after = close + kThinkClose.size();
  out.final = std::string(text::ltrim(text.substr(after)));
  if (nothink == std::string_view::npos &&
      (out.think->find(kThinkOpen) != std::string::npos || has_stray_token(text, after))) {
    out.issues.push_back(structural(IssueCode::ConflictingModeTokens, body, text.size(), "stray protocol token"));
  }
  if (text::trim(out.final).empty()) {
    out.final.clear();
    const std::size_t clause = find_answer_clause(*out.think, answer_markers);
    if (clause != std::string_view::npos) {
      out.issues.push_back(structural(IssueCode::AnswerInThink, body + clause, close,
                                      "final answer contained within the reasoning block"));
    } else {
      out.issues.push_back(structural(IssueCode::EmptyAnswer, after, text.size(), "no answer after </think>"));
    }
  }
  out.mode = out.issues.empty() ? ResponseMode::Reason : ResponseMode::Malformed;
  return out;
}

RepairResult repair_transcript(const ParsedResponse& parsed, const std::vector<std::string>& answer_markers) {
  RepairResult out{parsed.raw, {}};
  if (parsed.issues.empty()) return out;

  bool blocked = false;
  for (const LintIssue& issue : parsed.issues) {
    if (issue.code != IssueCode::AnswerInThink) {
      out.fixes.push_back({issue.code, false, "skipped: " + std::string(to_string(issue.code))});
      blocked = true;
    }
  }
  if (blocked) {
    // Report the fixable issue as skipped too: the text is left untouched.
    for (const LintIssue& issue : parsed.issues) {
      if (issue.code == IssueCode::AnswerInThink) {
        out.fixes.push_back({issue.code, false, "skipped: transcript has unfixable structural damage"});
      }
    }
    return out;
  }

  const std::string& think = *parsed.think;
  const std::size_t clause = find_answer_clause(think, answer_markers);
  const std::string_view kept = text::rtrim(std::string_view(think).substr(0, clause));
  const std::string_view answer = text::trim(std::string_view(think).substr(clause));
  out.text = render_unchecked(Mode::Reason, std::string(kept), answer);
  out.fixes.push_back({IssueCode::AnswerInThink, true, "moved \"" + std::string(answer) + "\" after </think>"});
  return out;
}

}  // namespace mmtk
