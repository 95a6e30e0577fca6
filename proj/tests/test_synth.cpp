#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "mmtk/error.hpp"
#include "mmtk/image.hpp"
#include "mmtk/judge.hpp"
#include "mmtk/synth.hpp"
#include "oracles.hpp"

using namespace mmtk;

namespace {

std::vector<CaptionedImage> items(std::size_t n) {
  std::vector<CaptionedImage> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back({"img" + std::to_string(i) + ".png", "caption number " + std::to_string(i)});
  return v;
}

SynthConfig cfg_with(std::uint64_t seed, double insert_prob = 0.2) {
  SynthConfig c;
  c.seed = seed;
  c.insert_prob = insert_prob;
  return c;
}

bool is_bijection(const nlohmann::json& order, std::size_t n) {
  std::set<std::size_t> s;
  for (const auto& v : order) s.insert(v.get<std::size_t>());
  return order.size() == n && s.size() == n && *s.begin() == 1 && *s.rbegin() == n;
}

}  // namespace

TEST_CASE("scrambled needs two items") {
  CHECK_THROWS_AS(synth_scrambled(items(1), cfg_with(1)), InputError);
  SynthConfig bad;
  bad.group_size = 1;
  CHECK_THROWS_AS(synth_scrambled(items(3), bad), ConfigError);
  bad.group_size = 5;
  bad.insert_prob = 1.5;
  CHECK_THROWS_AS(synth_scrambled(items(3), bad), ConfigError);
}

TEST_CASE("scrambled order is a seeded bijection") {
  auto a = synth_scrambled(items(5), cfg_with(7));
  auto b = synth_scrambled(items(5), cfg_with(7));
  CHECK(is_bijection(a.meta["request_order"], 5));
  CHECK(to_jsonl_line(a) == to_jsonl_line(b));
  CHECK(a.mode == Mode::Direct);
}

TEST_CASE("insert probability zero keeps group size") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto r = synth_scrambled(items(8), cfg_with(seed, 0.0));
    CHECK(r.images.size() == 5);
    CHECK(r.meta["request_order"].size() == 5);
    CHECK(r.meta["extra_image"].is_null());
    CHECK(r.turns.size() == 1);
  }
}

TEST_CASE("insert probability one adds an image and a request") {
  auto r = synth_scrambled(items(8), cfg_with(3, 1.0));
  CHECK(r.images.size() == 6);
  CHECK(r.meta["extra_image"] == 6);
  CHECK(r.turns.size() == 3);
  CHECK(r.final.find("caption number 5") != std::string::npos);
}

TEST_CASE("caption match gold recovers the pairing") {
  const auto its = items(5);
  auto r = synth_caption_match(its, cfg_with(11));
  const auto& gold = r.meta["caption_to_image"];
  REQUIRE(is_bijection(gold, 5));
  // The j-th listed caption must be the caption of image gold[j].
  const std::string& prompt = r.turns[0].text;
  for (std::size_t j = 0; j < 5; ++j) {
    const std::string line = std::to_string(j + 1) + ". " + its[gold[j].get<std::size_t>() - 1].caption;
    CHECK(prompt.find(line) != std::string::npos);
  }
}

TEST_CASE("caption match with two items") {
  auto r = synth_caption_match(items(2), cfg_with(0));
  CHECK(is_bijection(r.meta["caption_to_image"], 2));
}

TEST_CASE("duplicate captions are rejected") {
  std::vector<CaptionedImage> dup{{"a.png", "a cat"}, {"b.png", "A Cat "}};
  CHECK_THROWS_AS(synth_caption_match(dup, cfg_with(1)), InputError);
}

TEST_CASE("identity permutation rate is near 1/n!") {
  std::size_t identity = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto r = synth_scrambled(items(5), cfg_with(seed, 0.0));
    const auto& o = r.meta["request_order"];
    bool id = true;
    for (std::size_t j = 0; j < 5; ++j) id = id && o[j] == j + 1;
    identity += id ? 1 : 0;
  }
  const double p = 1.0 / 120.0;
  const double mean = 1000 * p;
  const double sigma = std::sqrt(1000 * p * (1 - p));
  CHECK(std::abs(static_cast<double>(identity) - mean) <= 3 * sigma);
}

TEST_CASE("diff region fixture") {
  Image a(640, 480, 3, 20);
  Image b = a;
  b.fill_rect(100, 50, 10, 10, 200);
  SynthConfig cfg;
  auto r = diff_region(a, b, cfg);
  REQUIRE(r.has_value());
  CHECK(r->x == doctest::Approx(0.15625));
  CHECK(r->y == doctest::Approx(50.0 / 480.0));
  CHECK(r->w == doctest::Approx(0.015625));
  CHECK(r->h == doctest::Approx(10.0 / 480.0));
  CHECK_FALSE(diff_region(a, a, cfg).has_value());

  auto sym = diff_region(b, a, cfg);
  REQUIRE(sym.has_value());
  CHECK(sym->x == r->x);
  CHECK(sym->w == r->w);
}

TEST_CASE("two blocks give their union box") {
  Image a(200, 100, 1, 0);
  Image b = a;
  b.fill_rect(10, 20, 5, 5, 255);
  b.fill_rect(150, 70, 10, 20, 255);
  auto r = diff_region(a, b, SynthConfig{});
  REQUIRE(r.has_value());
  CHECK(r->x == doctest::Approx(0.05));
  CHECK(r->y == doctest::Approx(0.2));
  CHECK(r->w == doctest::Approx(0.75));
  CHECK(r->h == doctest::Approx(0.7));
}

TEST_CASE("diff region dimension mismatch") {
  CHECK_THROWS_AS(diff_region(Image(4, 4, 1), Image(4, 5, 1), SynthConfig{}), InputError);
}

TEST_CASE("diff region against a pixel scan") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 40; ++i) {
    const int w = 8 + static_cast<int>(rng() % 120), h = 8 + static_cast<int>(rng() % 120);
    Image a(w, h, 3);
    for (auto& p : a.pixels) p = static_cast<std::uint8_t>(rng() % 256);
    Image b = a;
    const int changes = static_cast<int>(rng() % 4);
    for (int k = 0; k < changes; ++k) {
      const int x = static_cast<int>(rng() % w), y = static_cast<int>(rng() % h), c = static_cast<int>(rng() % 3);
      b.at(x, y, c) = static_cast<std::uint8_t>(rng() % 256);
    }
    SynthConfig cfg;
    auto got = diff_region(a, b, cfg);
    auto want = oracle::changed_box(a, b, 16);
    REQUIRE(got.has_value() == want.has_value());
    if (want) {
      CHECK(got->x == doctest::Approx(double(want->x0) / w));
      CHECK(got->y == doctest::Approx(double(want->y0) / h));
      CHECK(got->w == doctest::Approx(double(want->x1 - want->x0 + 1) / w));
      CHECK(got->h == doctest::Approx(double(want->y1 - want->y0 + 1) / h));
    }
  }
}

TEST_CASE("whats changed from decoded frames") {
  Image a(640, 480, 3, 20);
  Image b = a;
  b.fill_rect(100, 50, 10, 10, 200);
  FrameSequence pair{{"f1.png", "f2.png"}, {}};
  auto same = synth_whats_changed(pair, {a, a}, nullptr, SynthConfig{});
  CHECK(same.final == describe_change(std::nullopt));
  CHECK(same.mode == Mode::Direct);

  auto moved = synth_whats_changed(pair, {a, b}, nullptr, SynthConfig{});
  CHECK(moved.final.find("x=0.1562") != std::string::npos);
  REQUIRE(moved.annotations.has_value());
  CHECK(moved.annotations->at(0).coords[0] == doctest::Approx(0.15625));

  FrameSequence triple{{"f1.png", "f2.png", "f3.png"}, {}};
  auto t = synth_whats_changed(triple, {a, b, a}, nullptr, SynthConfig{});
  const auto users = std::count_if(t.turns.begin(), t.turns.end(), [](const Turn& x) { return x.role == Role::User; });
  CHECK(users == 2);

  FrameSequence single{{"f1.png"}, {}};
  CHECK_THROWS_AS(synth_whats_changed(single, {a}, nullptr, SynthConfig{}), InputError);
}

TEST_CASE("whats changed uses the describer and its fallback") {
  Image a(32, 32, 1, 0);
  Image b = a;
  b.fill_rect(0, 0, 4, 4, 255);
  FrameSequence pair{{"f1.png", "f2.png"}, {}};
  MockJudge describer({"A square appeared in the top-left corner."});
  auto r = synth_whats_changed(pair, {a, b}, &describer, SynthConfig{});
  CHECK(r.final == "A square appeared in the top-left corner.");

  MockJudge broken({MockJudge::kFail});
  auto fb = synth_whats_changed(pair, {a, b}, &broken, SynthConfig{});
  CHECK(fb.final == describe_change(diff_region(a, b, SynthConfig{})));

  SynthConfig strict;
  strict.allow_fallback = false;
  CHECK_THROWS_AS(synth_whats_changed(pair, {a, b}, &broken, strict), TransportError);
}

TEST_CASE("frames load from disk") {
  const auto dir = std::filesystem::temp_directory_path() / "mmtk_synth_test";
  std::filesystem::create_directories(dir);
  Image a(64, 48, 3, 10);
  Image b = a;
  b.fill_rect(8, 8, 8, 8, 250);
  save_pnm((dir / "a.ppm").string(), a);
  save_pnm((dir / "b.ppm").string(), b);
  auto loaded = load_image((dir / "b.ppm").string());
  CHECK(loaded.pixels == b.pixels);
  FrameSequence pair{{(dir / "a.ppm").string(), (dir / "b.ppm").string()}, {}};
  auto r = synth_whats_changed(pair, nullptr, SynthConfig{});
  REQUIRE(r.annotations.has_value());
  CHECK(r.annotations->at(0).coords[0] == doctest::Approx(0.125));
  CHECK_THROWS_AS(load_image((dir / "missing.png").string()), Error);
}
