#include <doctest.h>

#include <algorithm>
#include <random>

#include "mmtk/curation.hpp"
#include "mmtk/error.hpp"
#include "mmtk/judge.hpp"

using namespace mmtk;

namespace {

SampleRecord clean() {
  SampleRecord r;
  r.id = "c1";
  r.images = {"img/a.png"};
  r.turns = {{Role::User, "<image_1> What color is the car?"}, {Role::Assistant, "red"}};
  r.mode = Mode::Direct;
  r.final = "red";
  return r;
}

bool has(const std::vector<LintIssue>& v, IssueCode c) {
  return std::any_of(v.begin(), v.end(), [&](const LintIssue& i) { return i.code == c; });
}

}  // namespace

TEST_CASE("clean record has no issues") { CHECK(lint_record(clean()).empty()); }

TEST_CASE("misspelled tag is flagged and fixable") {
  auto r = clean();
  r.turns[0].text = "<imgae_1> What color is the car?";
  auto issues = lint_record(r);
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].code == IssueCode::MisspelledImageTag);
  CHECK(issues[0].fixable);
  CHECK(issues[0].location.field == "conversations[0].text");

  auto fixed = fix_record(r, issues);
  CHECK(fixed.record.turns[0].text == "<image_1> What color is the car?");
  CHECK(lint_record(fixed.record).empty());
  CHECK(r.turns[0].text == "<imgae_1> What color is the car?");
}

TEST_CASE("out of range coordinates") {
  auto r = clean();
  r.annotations = std::vector<Annotation>{{AnnotationKind::Point, {1.2, 0.5}, "p"}};
  auto issues = lint_record(r);
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].code == IssueCode::CoordOutOfRange);
  auto fixed = fix_record(r, issues);
  CHECK(fixed.record.annotations->at(0).coords == std::vector<double>{1.0, 0.5});
  CHECK(lint_record(fixed.record).empty());

  auto wide = clean();
  wide.annotations = std::vector<Annotation>{{AnnotationKind::Rect, {0.8, 0.1, 0.5, 0.2}, "box"}};
  auto wi = lint_record(wide);
  CHECK(has(wi, IssueCode::CoordOutOfRange));
  CHECK(lint_record(fix_record(wide, wi).record).empty());
}

TEST_CASE("dangling image reference") {
  auto r = clean();
  r.turns[0].text = "<image_3> hmm";
  CHECK(has(lint_record(r), IssueCode::DanglingImageRef));
}

TEST_CASE("answer in think is flagged and repaired") {
  auto r = clean();
  r.mode = Mode::Reason;
  r.think = "the car is red. Final answer: red";
  r.final = "";
  auto issues = lint_record(r);
  CHECK(has(issues, IssueCode::AnswerInThink));
  auto fixed = fix_record(r, issues);
  CHECK(fixed.record.final == "Final answer: red");
  CHECK(fixed.record.think == "the car is red.");
  CHECK(lint_record(fixed.record).empty());
}

TEST_CASE("lint is deterministic") {
  auto r = clean();
  r.turns[0].text = "<imag_1> <image_9>";
  r.annotations = std::vector<Annotation>{{AnnotationKind::Point, {-0.1, 2.0}, "p"}};
  auto a = lint_record(r);
  auto b = lint_record(r);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].code == b[i].code);
    CHECK(a[i].location.begin == b[i].location.begin);
  }
}

TEST_CASE("dataset suggestions") {
  std::vector<SampleRecord> records;
  for (int i = 0; i < 100; ++i) {
    auto r = clean();
    r.id = "r" + std::to_string(i);
    records.push_back(r);
  }
  auto excellent = summarize_dataset(records);
  CHECK(excellent.suggestion == QualityLabel::Excellent);
  CHECK(excellent.total_issues() == 0);

  auto formats = records;
  for (int i = 0; i < 40; ++i) formats[static_cast<std::size_t>(i)].turns[0].text = "<imgae_1> q";
  auto fe = summarize_dataset(formats);
  CHECK(fe.suggestion == QualityLabel::FormatErrors);
  CHECK(fe.records_with_fixable == 40);
  std::size_t sum = 0;
  for (const auto& [code, n] : fe.histogram) sum += n;
  CHECK(sum == fe.total_issues());
  CHECK_FALSE(fe.evidence.empty());
  CHECK(std::all_of(fe.evidence.begin(), fe.evidence.end(), [](const LintIssue& i) { return i.fixable; }));

  std::vector<JudgeVerdict> verdicts;
  for (int i = 0; i < 100; ++i) verdicts.push_back({"r" + std::to_string(i), i >= 30});
  auto wrong = summarize_dataset(records, verdicts);
  CHECK(wrong.suggestion == QualityLabel::GoodQWrongA);
  CHECK(wrong.disagreements == 30);

  auto empty = summarize_dataset({});
  CHECK_FALSE(empty.suggestion.has_value());
  CHECK(empty.record_count == 0);
}

TEST_CASE("duplicate images surface in the report") {
  auto a = clean();
  auto b = clean();
  b.id = "c2";
  auto rep = summarize_dataset({a, b});
  REQUIRE(rep.duplicate_images.size() == 1);
  CHECK(rep.duplicate_images[0].second == 2);
}

TEST_CASE("majority vote") {
  auto v1 = majority_vote({"A", "A", "A"});
  CHECK(v1.verified);
  CHECK(v1.answer == "A");
  auto v2 = majority_vote({"A", "A", "B", "A", "C"});
  CHECK(v2.verified);
  CHECK(v2.answer == "A");
  CHECK(v2.share == doctest::Approx(0.6));
  CHECK_FALSE(majority_vote({"A", "B", "C"}).verified);
  CHECK_FALSE(majority_vote({"A", "A", "B", "B"}).verified);
  CHECK(majority_vote({"42.50 kg", "42.5", " 42.5000 "}).verified);
  CHECK(normalize_answer("$1,200.00") == "1200");
  CHECK(normalize_answer("  Red. ") == "red");
}

TEST_CASE("majority vote is permutation invariant") {
  std::mt19937_64 rng(8);
  const std::vector<std::string> pool{"A", "a", "B", " b", "7", "7.0", "C"};
  for (int i = 0; i < 300; ++i) {
    std::vector<std::string> c;
    const std::size_t n = 1 + rng() % 9;
    for (std::size_t k = 0; k < n; ++k) c.push_back(pool[rng() % pool.size()]);
    auto base = majority_vote(c);
    std::shuffle(c.begin(), c.end(), rng);
    auto again = majority_vote(c);
    CHECK(base.verified == again.verified);
    CHECK(base.answer == again.answer);
  }
}

TEST_CASE("double duty") {
  const auto pool = default_template_pool();
  std::vector<FormatTemplate> single{pool[0]};
  auto out = reformat_double_duty(clean(), single, 1);
  REQUIRE(out.record.has_value());
  CHECK(out.record->final == "red");
  const auto& user = out.record->turns[0].text;
  CHECK(detect_requested_format(user) == AnswerFormat::SingleWord);
  CHECK(out.record->meta["provenance"]["source_id"] == "c1");
  CHECK(out.record->meta["provenance"]["transform"] == "double_duty");
  CHECK(out.record->meta["provenance"]["seed"] == 1);
  CHECK(clean().turns[0].text == "<image_1> What color is the car?");

  std::vector<FormatTemplate> json{pool[1]};
  auto j = reformat_double_duty(clean(), json, 1);
  REQUIRE(j.record.has_value());
  CHECK(nlohmann::json::parse(j.record->final)["answer"] == "red");
  CHECK(lint_record(*j.record).empty());

  auto a = reformat_double_duty(clean(), pool, 77);
  auto b = reformat_double_duty(clean(), pool, 77);
  REQUIRE(a.record.has_value());
  CHECK(to_jsonl_line(*a.record) == to_jsonl_line(*b.record));

  auto sentence = clean();
  sentence.final = "The car is red and shiny.";
  std::vector<FormatTemplate> one_word{pool[0]};
  auto skipped = reformat_double_duty(sentence, one_word, 3);
  CHECK_FALSE(skipped.record.has_value());
  CHECK_FALSE(skipped.skip_reason.empty());
}

TEST_CASE("format mismatch warning") {
  auto r = clean();
  r.turns[0].text += " Answer with a number only.";
  auto issues = lint_record(r);
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].code == IssueCode::FormatMismatch);
  CHECK(issues[0].severity == Severity::Warning);
}

TEST_CASE("regenerate with a mock judge") {
  MockJudge unanimous({"42"});
  auto r = regenerate_answer(clean(), unanimous);
  CHECK(r.verdict.verified);
  CHECK(r.record.final == "42");
  CHECK_FALSE(r.excluded);
  CHECK(unanimous.calls() == 3);
  CHECK(r.record.meta["provenance"]["transform"] == "regenerate");

  MockJudge mixed({"A", "B", "A", "A", "B"});
  RegenerateOptions five;
  five.votes = 5;
  auto m = regenerate_answer(clean(), mixed, five);
  CHECK(m.verdict.verified);
  CHECK(m.record.final == "A");

  MockJudge distinct({"x", "y", "z"});
  auto d = regenerate_answer(clean(), distinct);
  CHECK_FALSE(d.verdict.verified);
  CHECK(d.excluded);
  CHECK(d.record.meta["excluded"] == true);
  CHECK(d.record.final == "red");
}

TEST_CASE("regenerate retries transport failures") {
  MockJudge flaky({MockJudge::kFail, "42", "42", "42"});
  auto r = regenerate_answer(clean(), flaky);
  CHECK(r.verdict.verified);
  CHECK(flaky.calls() == 4);

  MockJudge down({MockJudge::kFail});
  CHECK_THROWS_AS(regenerate_answer(clean(), down), TransportError);
  CHECK(down.calls() == 3);

  MockJudge ok({"1"});
  BudgetedJudge capped(ok, 2);
  CHECK_THROWS_AS(regenerate_answer(clean(), capped), TransportError);
}

TEST_CASE("description prompt seeds the judge request") {
  MockJudge judge({"a red car"});
  RegenerateOptions opts;
  opts.votes = 1;
  opts.description_prompt = "Describe the image in detail.";
  regenerate_answer(clean(), judge, opts);
  REQUIRE_FALSE(judge.prompts().empty());
  CHECK(judge.prompts()[0].find("Describe the image in detail.") != std::string::npos);
}
