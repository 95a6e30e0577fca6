#include <doctest.h>

#include <random>

#include "mmtk/error.hpp"
#include "mmtk/fusion.hpp"
#include "oracles.hpp"

using namespace mmtk;

namespace {

PatchPlan plan_with(std::int64_t tokens) {
  PatchPlan p;
  p.token_count = tokens;
  return p;
}

TokenStream text(std::size_t n) {
  TokenStream s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(TextToken{static_cast<std::int64_t>(i)});
  return s;
}

}  // namespace

TEST_CASE("text-only stream") {
  auto layout = assemble_sequence(text(12), {});
  CHECK(layout.total_len == 12);
  CHECK(layout.visual_spans.empty());
}

TEST_CASE("one image in ten items gives 587 tokens") {
  TokenStream s = text(9);
  s.insert(s.begin() + 4, ImagePlaceholder{0});
  std::vector<PatchPlan> plans{plan_with(576)};
  auto layout = assemble_sequence(s, plans);
  CHECK(layout.total_len == 587);
  REQUIRE(layout.visual_spans.size() == 1);
  CHECK(layout.visual_spans[0] == VisualSpan{4 + 1, 576, 0});
  CHECK(validate_layout(layout, 8192).empty());
}

TEST_CASE("two images in twenty items gives 1750 tokens") {
  TokenStream s = text(18);
  s.insert(s.begin() + 3, ImagePlaceholder{0});
  s.insert(s.begin() + 12, ImagePlaceholder{1});
  std::vector<PatchPlan> plans{plan_with(576), plan_with(1152)};
  auto layout = assemble_sequence(s, plans);
  CHECK(layout.total_len == 1750);
  REQUIRE(layout.visual_spans.size() == 2);
  const auto& a = layout.visual_spans[0];
  const auto& b = layout.visual_spans[1];
  CHECK(a.length == 576);
  CHECK(b.length == 1152);
  CHECK(a.start + a.length < b.start);
  CHECK(validate_layout(layout, 8192).empty());
}

TEST_CASE("missing, unused and duplicate plans") {
  TokenStream s = text(3);
  s.push_back(ImagePlaceholder{1});
  std::vector<PatchPlan> one{plan_with(10)};
  CHECK_THROWS_AS(assemble_sequence(s, one), ReferenceError);

  std::vector<PatchPlan> two{plan_with(10), plan_with(10)};
  TokenStream only_first = text(2);
  only_first.push_back(ImagePlaceholder{0});
  CHECK_THROWS_AS(assemble_sequence(only_first, two), ReferenceError);

  TokenStream dup = text(2);
  dup.push_back(ImagePlaceholder{0});
  dup.push_back(ImagePlaceholder{0});
  CHECK_THROWS_AS(assemble_sequence(dup, one), InputError);
}

TEST_CASE("validate_layout rules") {
  FusedLayout l;
  l.total_len = 16385;
  auto v = validate_layout(l, 16384);
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule == LayoutRule::Length);

  FusedLayout o;
  o.total_len = 100;
  o.visual_spans = {{10, 20, 0}, {29, 5, 1}};
  auto ov = validate_layout(o, 1000);
  REQUIRE(ov.size() == 1);
  CHECK(ov[0].rule == LayoutRule::Overlap);

  FusedLayout b;
  b.total_len = 10;
  b.visual_spans = {{5, 10, 0}};
  auto bv = validate_layout(b, 1000);
  REQUIRE(bv.size() == 1);
  CHECK(bv[0].rule == LayoutRule::Bounds);

  FusedLayout ord;
  ord.total_len = 100;
  ord.visual_spans = {{50, 5, 0}, {10, 5, 1}};
  auto rv = validate_layout(ord, 1000);
  CHECK(std::any_of(rv.begin(), rv.end(), [](const LayoutViolation& x) { return x.rule == LayoutRule::Order; }));
}

TEST_CASE("length formula against summation on random streams") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    const std::size_t n_images = rng() % 5;
    std::vector<PatchPlan> plans;
    for (std::size_t k = 0; k < n_images; ++k) plans.push_back(plan_with(static_cast<std::int64_t>(rng() % 4000)));
    TokenStream s = text(rng() % 300);
    for (std::size_t k = 0; k < n_images; ++k) {
      s.insert(s.begin() + static_cast<std::ptrdiff_t>(rng() % (s.size() + 1)), ImagePlaceholder{k});
    }
    const std::int64_t overhead = static_cast<std::int64_t>(rng() % 4);
    auto layout = assemble_sequence(s, plans, overhead);
    CHECK(layout.total_len == oracle::layout_length(s, plans, overhead));
    CHECK(validate_layout(layout, layout.total_len).empty());
    CHECK(layout.visual_spans.size() == n_images);
  }
}

TEST_CASE("concatenated streams add their lengths") {
  std::vector<PatchPlan> plans{plan_with(100), plan_with(200)};
  TokenStream a = text(5);
  a.push_back(ImagePlaceholder{0});
  TokenStream b = text(7);
  b.push_back(ImagePlaceholder{0});
  std::vector<PatchPlan> pa{plans[0]};
  std::vector<PatchPlan> pb{plans[1]};
  TokenStream ab = a;
  const TokenStream more = text(7);
  ab.insert(ab.end(), more.begin(), more.end());
  ab.push_back(ImagePlaceholder{1});
  CHECK(assemble_sequence(ab, plans).total_len == assemble_sequence(a, pa).total_len + assemble_sequence(b, pb).total_len);
}

TEST_CASE("layout json") {
  TokenStream s = text(2);
  s.push_back(ImagePlaceholder{0});
  std::vector<PatchPlan> plans{plan_with(4)};
  auto j = to_json(assemble_sequence(s, plans));
  CHECK(j["total_len"] == 8);
  CHECK(j["visual_spans"].size() == 1);
}
