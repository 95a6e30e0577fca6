#include "mmtk/curation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <set>

#include "mmtk/error.hpp"
#include "mmtk/rng.hpp"
#include "mmtk/text.hpp"

namespace mmtk {

namespace {

struct TagHit {
  std::size_t begin;
  std::size_t end;
  std::string_view tag;
};

// Angle-bracket tokens without whitespace, e.g. "<image_1>", "<imgae_1>".
std::vector<TagHit> scan_tags(std::string_view s) {
  std::vector<TagHit> out;
  std::size_t i = 0;
  while ((i = s.find('<', i)) != std::string_view::npos) {
    std::size_t j = i + 1;
    while (j < s.size() && j - i <= 40 && s[j] != '>' && s[j] != '<' &&
           !std::isspace(static_cast<unsigned char>(s[j]))) {
      ++j;
    }
    if (j < s.size() && s[j] == '>' && j > i + 1) {
      out.push_back({i, j + 1, s.substr(i, j + 1 - i)});
      i = j + 1;
    } else {
      ++i;
    }
  }
  return out;
}

bool is_protocol_token(std::string_view t) { return t == kThinkOpen || t == kThinkClose || t == kNoThink; }

// Index of "<image_K>" or nullopt when the tag is not in that family.
std::optional<long> image_tag_index(std::string_view t) {
  static const std::regex re(R"(^<image_(\d{1,6})>$)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_match(t.begin(), t.end(), m, re)) return std::nullopt;
  return std::stol(m[1].str());
}

struct TextField {
  std::string name;
  const std::string* text;
};

std::vector<TextField> text_fields(const SampleRecord& rec) {
  std::vector<TextField> out;
  for (std::size_t i = 0; i < rec.turns.size(); ++i) {
    out.push_back({"conversations[" + std::to_string(i) + "].text", &rec.turns[i].text});
  }
  if (rec.think) out.push_back({"think", &*rec.think});
  out.push_back({"final", &rec.final});
  return out;
}

const std::string* field_text(const SampleRecord& rec, const std::string& name) {
  for (const TextField& f : text_fields(rec)) {
    if (f.name == name) return f.text;
  }
  return nullptr;
}

std::string* mutable_field(SampleRecord& rec, const std::string& name) {
  if (name == "think") return rec.think ? &*rec.think : nullptr;
  if (name == "final") return &rec.final;
  for (std::size_t i = 0; i < rec.turns.size(); ++i) {
    if (name == "conversations[" + std::to_string(i) + "].text") return &rec.turns[i].text;
  }
  return nullptr;
}

// Nearest known tag within the distance bound, if the tag is a near miss.
std::optional<std::string> near_miss(std::string_view tag, const std::vector<std::string>& known, std::size_t max_dist) {
  std::optional<std::string> best;
  std::size_t best_d = max_dist + 1;
  for (const auto& k : known) {
    const std::size_t d = text::osa_distance(tag, k);
    if (d == 0) return std::nullopt;
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

bool coords_ok(const Annotation& a) {
  for (double c : a.coords) {
    if (!std::isfinite(c) || c < 0.0 || c > 1.0) return false;
  }
  if (a.kind == AnnotationKind::Rect) return a.coords[0] + a.coords[2] <= 1.0 && a.coords[1] + a.coords[3] <= 1.0;
  return true;
}

std::optional<std::string> canonical_number(std::string_view s) {
  std::string t = text::casefold(text::trim(s));
  for (std::string_view cur : {"$", "\xe2\x82\xac", "\xc2\xa3"}) {
    if (t.rfind(cur, 0) == 0) {
      t.erase(0, cur.size());
      break;
    }
  }
  static const std::regex re(R"(^\s*([-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?|[-+]?\.\d+)\s*([a-z%]+\.?)?\s*$)");
  std::smatch m;
  if (!std::regex_match(t, m, re)) return std::nullopt;
  const auto v = text::parse_number(m[1].str());
  if (!v) return std::nullopt;
  return text::format_number(*v);
}

}  // namespace

// ---------------------------------------------------------------------------
// Lint

std::vector<std::string> default_known_tags(const SampleRecord& rec) {
  std::vector<std::string> tags{"<image>"};
  for (std::size_t i = 1; i <= rec.images.size(); ++i) tags.push_back("<image_" + std::to_string(i) + ">");
  return tags;
}

std::vector<LintIssue> lint_record(const SampleRecord& rec, const LintOptions& opts) {
  std::vector<LintIssue> issues;
  const std::vector<std::string> known = opts.known_tags.empty() ? default_known_tags(rec) : opts.known_tags;

  for (const TextField& f : text_fields(rec)) {
    for (const TagHit& hit : scan_tags(*f.text)) {
      if (is_protocol_token(hit.tag)) continue;
      if (const auto idx = image_tag_index(hit.tag)) {
        if (*idx < 1 || static_cast<std::size_t>(*idx) > rec.images.size()) {
          issues.push_back(LintIssue::make(IssueCode::DanglingImageRef, {rec.id, f.name, hit.begin, hit.end},
                                           std::string(hit.tag) + " but the record has " +
                                               std::to_string(rec.images.size()) + " image(s)"));
        }
        continue;
      }
      if (hit.tag == "<image>") {
        if (rec.images.empty()) {
          issues.push_back(LintIssue::make(IssueCode::DanglingImageRef, {rec.id, f.name, hit.begin, hit.end},
                                           "<image> but the record has no images"));
        }
        continue;
      }
      if (const auto fix = near_miss(hit.tag, known, opts.max_tag_distance)) {
        issues.push_back(LintIssue::make(IssueCode::MisspelledImageTag, {rec.id, f.name, hit.begin, hit.end},
                                         std::string(hit.tag) + " -> " + *fix));
      }
    }
  }

  if (rec.annotations) {
    for (std::size_t i = 0; i < rec.annotations->size(); ++i) {
      if (!coords_ok((*rec.annotations)[i])) {
        issues.push_back(LintIssue::make(IssueCode::CoordOutOfRange,
                                         {rec.id, "annotations[" + std::to_string(i) + "]", 0, 0},
                                         "coordinates must lie in [0, 1]"));
      }
    }
  }

  if (rec.mode == Mode::Reason && !rec.think) {
    issues.push_back(LintIssue::make(IssueCode::ModeMismatch, {rec.id, "mode", 0, 0}, "reason mode without think"));
  } else if (rec.mode == Mode::Direct && rec.think) {
    issues.push_back(LintIssue::make(IssueCode::ModeMismatch, {rec.id, "mode", 0, 0}, "direct mode with think"));
  }

  const std::optional<std::string> think = rec.mode == Mode::Reason ? rec.think : std::nullopt;
  const ParsedResponse parsed = parse_transcript(render_unchecked(rec.mode, think, rec.final), opts.answer_markers);
  for (LintIssue issue : parsed.issues) {
    issue.location.record_id = rec.id;
    issue.location.field = issue.code == IssueCode::AnswerInThink ? "think" : "final";
    issues.push_back(std::move(issue));
  }

  if (const auto fmt = detect_requested_format(rec.last_user_text())) {
    if (!text::trim(rec.final).empty() && !complies_with_format(*fmt, rec.final)) {
      issues.push_back(LintIssue::make(IssueCode::FormatMismatch, {rec.id, "final", 0, rec.final.size()},
                                       "prompt requests " + std::string(to_string(*fmt))));
    }
  }
  return issues;
}

FixOutcome fix_record(const SampleRecord& rec, const std::vector<LintIssue>& issues, const LintOptions& opts) {
  FixOutcome out{rec, {}};
  SampleRecord& r = out.record;
  const std::vector<std::string> known = opts.known_tags.empty() ? default_known_tags(rec) : opts.known_tags;

  std::set<std::string> tag_fields;
  for (const LintIssue& issue : issues) {
    switch (issue.code) {
      case IssueCode::MisspelledImageTag: tag_fields.insert(issue.location.field); break;
      case IssueCode::AnswerInThink: {
        if (!r.think) break;
        const std::size_t clause = find_answer_clause(*r.think, opts.answer_markers);
        if (clause == std::string::npos || !text::trim(r.final).empty()) break;
        const std::string answer(text::trim(std::string_view(*r.think).substr(clause)));
        r.think = std::string(text::rtrim(std::string_view(*r.think).substr(0, clause)));
        r.final = answer;
        out.fixes.push_back({issue.code, true, "moved \"" + answer + "\" out of think"});
        break;
      }
      case IssueCode::CoordOutOfRange: {
        for (Annotation& a : *r.annotations) {
          for (double& c : a.coords) c = std::isfinite(c) ? std::clamp(c, 0.0, 1.0) : 0.0;
          if (a.kind == AnnotationKind::Rect) {
            a.coords[2] = std::min(a.coords[2], 1.0 - a.coords[0]);
            a.coords[3] = std::min(a.coords[3], 1.0 - a.coords[1]);
          }
        }
        out.fixes.push_back({issue.code, true, "clamped " + issue.location.field});
        break;
      }
      default:
        out.fixes.push_back({issue.code, false, "skipped: no fixer for " + std::string(to_string(issue.code))});
    }
  }

  for (const std::string& name : tag_fields) {
    std::string* field = mutable_field(r, name);
    if (!field) continue;
    // Replace back to front so earlier offsets stay valid.
    auto hits = scan_tags(*field);
    for (auto it = hits.rbegin(); it != hits.rend(); ++it) {
      if (is_protocol_token(it->tag) || image_tag_index(it->tag) || it->tag == "<image>") continue;
      if (const auto fix = near_miss(it->tag, known, opts.max_tag_distance)) {
        out.fixes.push_back({IssueCode::MisspelledImageTag, true, std::string(it->tag) + " -> " + *fix});
        field->replace(it->begin, it->end - it->begin, *fix);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset report

std::string_view to_string(QualityLabel l) {
  switch (l) {
    case QualityLabel::Excellent: return "excellent";
    case QualityLabel::GoodQWrongA: return "good_questions_wrong_answers";
    case QualityLabel::LowQualityQuestions: return "low_quality_questions";
    case QualityLabel::LowQualityImages: return "low_quality_images";
    case QualityLabel::FormatErrors: return "format_errors";
  }
  return "unknown";
}

std::size_t DatasetReport::total_issues() const {
  std::size_t n = 0;
  for (const auto& [_, c] : histogram) n += c;
  return n;
}

nlohmann::ordered_json DatasetReport::to_json() const {
  nlohmann::ordered_json j;
  j["record_count"] = record_count;
  j["total_issues"] = total_issues();
  j["records_with_fixable_issues"] = records_with_fixable;
  j["judge_disagreements"] = disagreements;
  nlohmann::ordered_json hist = nlohmann::ordered_json::object();
  for (const auto& [code, n] : histogram) hist[code] = n;
  j["issue_histogram"] = hist;
  j["suggested_label"] = suggestion ? nlohmann::ordered_json(std::string(to_string(*suggestion))) : nullptr;
  auto ex = nlohmann::ordered_json::array();
  for (const auto& e : excerpts) {
    ex.push_back({{"id", e.record_id}, {"code", std::string(to_string(e.code))}, {"excerpt", e.excerpt}});
  }
  j["excerpts"] = ex;
  auto dups = nlohmann::ordered_json::array();
  for (const auto& [ref, n] : duplicate_images) dups.push_back({{"image", ref}, {"records", n}});
  j["duplicate_images"] = dups;
  return j;
}

DatasetSummarizer::DatasetSummarizer(LintOptions opts, LabelThresholds thresholds, std::size_t max_excerpts)
    : opts_(std::move(opts)), thresholds_(thresholds), max_excerpts_(max_excerpts) {}

void DatasetSummarizer::add(const SampleRecord& rec) { add(rec, lint_record(rec, opts_)); }

void DatasetSummarizer::add(const SampleRecord& rec, const std::vector<LintIssue>& issues) {
  ++report_.record_count;
  bool fixable = false;
  for (const LintIssue& issue : issues) {
    ++report_.histogram[std::string(to_string(issue.code))];
    if (issue.fixable) {
      fixable = true;
      if (report_.evidence.size() < 20) report_.evidence.push_back(issue);
    }
    if (report_.excerpts.size() < max_excerpts_) {
      std::string excerpt;
      if (const std::string* f = field_text(rec, issue.location.field)) {
        const std::size_t from = issue.location.begin > 30 ? issue.location.begin - 30 : 0;
        excerpt = f->substr(std::min(from, f->size()), 80);
      }
      report_.excerpts.push_back({rec.id, issue.code, excerpt});
    }
  }
  if (fixable) ++report_.records_with_fixable;
  for (const auto& img : rec.images) ++image_refs_[img];
}

void DatasetSummarizer::add_verdict(const JudgeVerdict& v) {
  if (!v.agrees) ++report_.disagreements;
}

DatasetReport DatasetSummarizer::finish() const {
  DatasetReport r = report_;
  for (const auto& [ref, n] : image_refs_) {
    if (n > 1) r.duplicate_images.emplace_back(ref, n);
  }
  if (r.record_count == 0) return r;
  const double n = static_cast<double>(r.record_count);
  if (static_cast<double>(r.disagreements) / n >= thresholds_.disagreement_share) {
    r.suggestion = QualityLabel::GoodQWrongA;
  } else if (static_cast<double>(r.records_with_fixable) / n >= thresholds_.format_error_share) {
    r.suggestion = QualityLabel::FormatErrors;
  } else {
    r.suggestion = QualityLabel::Excellent;
  }
  return r;
}

DatasetReport summarize_dataset(const std::vector<SampleRecord>& records, const std::vector<JudgeVerdict>& verdicts,
                                const LintOptions& opts, const LabelThresholds& thresholds) {
  DatasetSummarizer s(opts, thresholds);
  for (const auto& r : records) s.add(r);
  for (const auto& v : verdicts) s.add_verdict(v);
  return s.finish();
}

// ---------------------------------------------------------------------------
// Majority vote

std::string normalize_answer(std::string_view s) {
  if (auto num = canonical_number(s)) return *num;
  std::string t = text::casefold(text::trim(s));
  while (!t.empty() && t.back() == '.') t.pop_back();
  return std::string(text::rtrim(t));
}

VoteVerdict majority_vote(const std::vector<std::string>& candidates, const AnswerNormalizer& normalizer,
                          double threshold) {
  if (!(threshold >= 0.5 && threshold <= 1.0)) throw ConfigError("vote threshold must lie in [0.5, 1.0]");
  VoteVerdict v;
  if (candidates.empty()) return v;

  std::map<std::string, std::vector<std::string_view>> classes;
  for (const auto& c : candidates) classes[normalizer(c)].push_back(text::trim(c));

  const std::vector<std::string_view>* winner = nullptr;
  for (const auto& [_, members] : classes) {
    if (!winner || members.size() > winner->size()) winner = &members;
  }
  v.share = static_cast<double>(winner->size()) / static_cast<double>(candidates.size());
  if (v.share > threshold) {
    v.verified = true;
    v.answer = std::string(*std::min_element(winner->begin(), winner->end()));
  }
  return v;
}

// ---------------------------------------------------------------------------
// Double-duty reformatting

std::string_view to_string(AnswerFormat f) {
  switch (f) {
    case AnswerFormat::SingleWord: return "single_word";
    case AnswerFormat::Json: return "json";
    case AnswerFormat::Lowercase: return "lowercase";
    case AnswerFormat::NumberOnly: return "number_only";
    case AnswerFormat::Sentence: return "sentence";
  }
  return "unknown";
}

std::optional<AnswerFormat> parse_answer_format(std::string_view s) {
  for (AnswerFormat f : {AnswerFormat::SingleWord, AnswerFormat::Json, AnswerFormat::Lowercase,
                         AnswerFormat::NumberOnly, AnswerFormat::Sentence}) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

std::vector<FormatTemplate> default_template_pool() {
  return {
      {AnswerFormat::SingleWord,
       {"Answer with a single word.", "Respond using just one word.", "Reply in one word only."}},
      {AnswerFormat::Json,
       {"Give the answer as JSON in the form {\"answer\": ...}.",
        "Return your answer as a JSON object with an \"answer\" key."}},
      {AnswerFormat::Lowercase, {"Write the answer in lowercase letters only.", "Respond in all lowercase."}},
      {AnswerFormat::NumberOnly, {"Answer with a number only.", "Reply with just the numeric value."}},
      {AnswerFormat::Sentence, {"Answer in a complete sentence.", "Please reply with a full sentence."}},
  };
}

bool complies_with_format(AnswerFormat format, std::string_view answer) {
  const std::string_view a = text::trim(answer);
  switch (format) {
    case AnswerFormat::SingleWord: return text::split_words(a).size() == 1;
    case AnswerFormat::Json: {
      const auto j = nlohmann::json::parse(a, nullptr, false);
      return !j.is_discarded() && j.is_object() && j.contains("answer");
    }
    case AnswerFormat::Lowercase:
      return !a.empty() && std::none_of(a.begin(), a.end(), [](char c) { return c >= 'A' && c <= 'Z'; });
    case AnswerFormat::NumberOnly: return text::parse_number(a).has_value();
    case AnswerFormat::Sentence:
      return text::split_words(a).size() >= 3 && !a.empty() && (a.back() == '.' || a.back() == '!' || a.back() == '?');
  }
  return false;
}

std::optional<std::string> apply_answer_format(AnswerFormat format, std::string_view answer) {
  const std::string_view a = text::trim(answer);
  if (a.empty()) return std::nullopt;
  switch (format) {
    case AnswerFormat::SingleWord: {
      const auto words = text::split_words(a);
      if (words.size() != 1) return std::nullopt;
      std::string w(words[0]);
      while (w.size() > 1 && (w.back() == '.' || w.back() == ',')) w.pop_back();
      return w;
    }
    case AnswerFormat::Json: return "{\"answer\": " + nlohmann::json(std::string(a)).dump() + "}";
    case AnswerFormat::Lowercase: return text::casefold(a);
    case AnswerFormat::NumberOnly: return canonical_number(a);
    case AnswerFormat::Sentence:
      if (complies_with_format(format, a)) return std::string(a);
      return "The answer is " + std::string(a) + ".";
  }
  return std::nullopt;
}

std::optional<AnswerFormat> detect_requested_format(std::string_view user_text, const std::vector<FormatTemplate>& pool) {
  for (const auto& t : pool) {
    for (const auto& p : t.phrasings) {
      if (text::rfind_icase(user_text, p) != std::string_view::npos) return t.format;
    }
  }
  return std::nullopt;
}

TransformOutcome reformat_double_duty(const SampleRecord& rec, const std::vector<FormatTemplate>& pool,
                                      std::uint64_t seed) {
  if (pool.empty()) throw ConfigError("double-duty template pool is empty");
  if (text::trim(rec.final).empty()) return {std::nullopt, "no ground-truth answer"};

  Rng rng(derive_seed(seed, rec.id));
  const FormatTemplate& tmpl = pool[uniform_below(rng, pool.size())];
  if (tmpl.phrasings.empty()) throw ConfigError("template without phrasings");
  const std::string& instruction = tmpl.phrasings[uniform_below(rng, tmpl.phrasings.size())];

  const auto formatted = apply_answer_format(tmpl.format, rec.final);
  if (!formatted) return {std::nullopt, "answer not representable as " + std::string(to_string(tmpl.format))};

  SampleRecord out = rec;
  auto user = std::find_if(out.turns.rbegin(), out.turns.rend(), [](const Turn& t) { return t.role == Role::User; });
  if (user == out.turns.rend()) return {std::nullopt, "record has no user turn"};
  user->text = std::string(text::rtrim(user->text)) + " " + instruction;
  out.final = *formatted;
  out.id = rec.id + "#dd-" + std::string(to_string(tmpl.format));
  add_provenance(out, rec.id, "double_duty", seed,
                 {{"format", std::string(to_string(tmpl.format))}, {"instruction", instruction}});
  return {std::move(out), {}};
}

// ---------------------------------------------------------------------------
// Judge regeneration

RegenerateOutcome regenerate_answer(const SampleRecord& rec, JudgeClient& judge, const RegenerateOptions& opts) {
  if (opts.votes == 0) throw ConfigError("regenerate needs at least one vote");
  if (opts.attempts == 0) throw ConfigError("regenerate needs at least one attempt");
  const std::string prompt = opts.description_prompt ? *opts.description_prompt : std::string(rec.last_user_text());
  if (prompt.empty()) throw InputError("record " + rec.id + " has no user prompt to regenerate from");

  std::vector<std::string> candidates;
  for (std::size_t v = 0; v < opts.votes; ++v) {
    for (std::size_t attempt = 1;; ++attempt) {
      try {
        candidates.push_back(judge.generate(prompt, rec.images));
        break;
      } catch (const TransportError&) {
        if (attempt >= opts.attempts) throw;
      }
    }
  }

  RegenerateOutcome out{rec, majority_vote(candidates, normalize_answer, opts.threshold), false};
  const nlohmann::json extra{{"votes", opts.votes}, {"share", out.verdict.share},
                             {"mode", opts.description_prompt ? "description" : "answer"}};
  if (out.verdict.verified) {
    out.record.final = out.verdict.answer;
    add_provenance(out.record, rec.id, "regenerate", std::nullopt, extra);
  } else {
    out.excluded = true;
    if (out.record.meta.is_null()) out.record.meta = nlohmann::json::object();
    out.record.meta["excluded"] = true;
    out.record.meta["exclusion_reason"] = "unverified: no majority among judge answers";
    add_provenance(out.record, rec.id, "regenerate", std::nullopt, extra);
  }
  return out;
}

}  // namespace mmtk
