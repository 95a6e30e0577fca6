#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include <httplib.h>

#include "mmtk/error.hpp"
#include "mmtk/eval.hpp"
#include "mmtk/judge.hpp"
#include "oracles.hpp"

using namespace mmtk;
using namespace std::chrono_literals;

namespace {

std::vector<EvalSample> samples(const std::string& bench, std::size_t n) {
  std::vector<EvalSample> v;
  for (std::size_t i = 0; i < n; ++i) {
    v.push_back({bench + "-" + std::to_string(i), bench, TaskKind::ExactMatch, "q" + std::to_string(i), {},
                 std::string("a" + std::to_string(i))});
  }
  return v;
}

MockModelClient echo_client(std::chrono::milliseconds delay, std::optional<std::int64_t> tokens = 7) {
  return MockModelClient(
      [tokens](const ModelRequest& r) {
        return Completion{"<nothink>a" + r.prompt.substr(1), tokens};
      },
      delay);
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto at = hay.find(needle); at != std::string::npos; at = hay.find(needle, at + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("score point in box") {
  const NormRect box{0.4, 0.4, 0.2, 0.2};
  CHECK(score_sample(TaskKind::PointInBox, "(0.5, 0.5)", box).score == 1);
  CHECK(score_sample(TaskKind::PointInBox, "click at 0.6, 0.4", box).score == 1);
  CHECK(score_sample(TaskKind::PointInBox, "(0.61, 0.5)", box).score == 0);
  auto bad = score_sample(TaskKind::PointInBox, "somewhere on the left", box);
  CHECK(bad.score == 0);
  CHECK(bad.parse_failure);
  CHECK_THROWS_AS(score_sample(TaskKind::PointInBox, "(0.5, 0.5)", std::string("x")), InputError);
}

TEST_CASE("score multiple choice fixtures") {
  struct Case {
    const char* pred;
    char want;
  };
  const Case cases[] = {
      {"The answer is (B).", 'B'},
      {"B", 'B'},
      {"I think it's C", 'C'},
      {"Answer: D, because A is wrong", 'D'},
      {"A dog is shown, so (C)", 'C'},
      {"Option E.", 'E'},
      {"<think>maybe A or B</think>\n(J)", 'J'},
      {"[G]", 'G'},
      {"Between A and F I choose F.", 'F'},
  };
  for (const auto& c : cases) {
    CAPTURE(c.pred);
    CHECK(extract_choice(extract_answer(c.pred)) == c.want);
    CHECK(score_sample(TaskKind::MultipleChoice, c.pred, std::string(1, c.want)).score == 1);
  }
  auto none = score_sample(TaskKind::MultipleChoice, "no idea", std::string("B"));
  CHECK(none.score == 0);
  CHECK(none.parse_failure);
}

TEST_CASE("score relaxed numeric and exact match") {
  CHECK(score_sample(TaskKind::RelaxedNumeric, "101", std::string("100")).score == 1);
  CHECK(score_sample(TaskKind::RelaxedNumeric, "106", std::string("100")).score == 0);
  CHECK(score_sample(TaskKind::RelaxedNumeric, "about 105 units", std::string("100")).score == 1);
  CHECK(score_sample(TaskKind::RelaxedNumeric, "95", std::string("100")).score == 1);
  CHECK(score_sample(TaskKind::RelaxedNumeric, "It is 1,234.5", std::string("1234.5")).score == 1);
  CHECK(score_sample(TaskKind::RelaxedNumeric, "none", std::string("3")).parse_failure);
  CHECK(score_sample(TaskKind::ExactMatch, "  Red ", std::string("red")).score == 1);
  CHECK(score_sample(TaskKind::ExactMatch, "<think>x</think>\nred", std::string("red")).score == 1);
  CHECK(score_sample(TaskKind::ExactMatch, "<think>red", std::string("red")).score == 0);
}

TEST_CASE("run benchmark draws a seeded subset sequentially") {
  auto client = echo_client(0ms);
  auto set = samples("bench", 2000);
  GenConfig gen;
  auto a = run_benchmark(client, set, gen, 100, 42);
  auto b = run_benchmark(client, set, gen, 100, 42);
  REQUIRE(a.size() == 100);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ids.insert(a[i].sample_id);
    CHECK(a[i].sample_id == b[i].sample_id);
    CHECK(a[i].score == 1);
    CHECK(a[i].output_tokens == 7);
    CHECK(a[i].token_source == TokenSource::Server);
  }
  CHECK(ids.size() == 100);
  CHECK(client.max_in_flight() == 1);
  CHECK(run_benchmark(client, set, gen, 0, 1).empty());
  CHECK_THROWS_AS(run_benchmark(client, set, gen, 2001, 1), InputError);
  auto c = run_benchmark(client, set, gen, 100, 43);
  std::size_t same = 0;
  for (std::size_t i = 0; i < c.size(); ++i) same += c[i].sample_id == a[i].sample_id;
  CHECK(same < 100);
}

TEST_CASE("latency brackets the programmed delay") {
  auto client = echo_client(50ms);
  auto set = samples("b", 10);
  auto results = run_benchmark(client, set, GenConfig{}, 5, 1);
  for (const auto& r : results) {
    CHECK(r.latency_ms >= 50.0);
    CHECK(r.latency_ms <= 70.0);
  }
}

TEST_CASE("fallback token counter") {
  auto client = echo_client(0ms, std::nullopt);
  auto set = samples("b", 3);
  auto results = run_benchmark(client, set, GenConfig{}, 3, 1);
  for (const auto& r : results) {
    CHECK(r.token_source == TokenSource::Fallback);
    CHECK(r.output_tokens == approx_token_count(r.prediction));
  }
  CHECK(approx_token_count("Hello, world 42!") == 5);
  CHECK(approx_token_count("") == 0);
}

TEST_CASE("transport errors become flagged results") {
  int calls = 0;
  MockModelClient flaky(
      [&](const ModelRequest&) -> Completion {
        if (++calls % 2 == 0) throw TransportError("connection reset");
        return {"<nothink>x", 1};
      },
      0ms);
  auto set = samples("b", 6);
  auto results = run_benchmark(flaky, set, GenConfig{}, 6, 1);
  REQUIRE(results.size() == 6);
  std::size_t errors = 0;
  for (const auto& r : results) {
    if (r.error) {
      ++errors;
      CHECK(r.score == 0);
      CHECK_FALSE(r.error_message.empty());
    }
  }
  CHECK(errors == 3);
  RunOptions strict;
  strict.fail_fast = true;
  calls = 1;
  CHECK_THROWS_AS(run_benchmark(flaky, set, GenConfig{}, 6, 1, strict), TransportError);
}

TEST_CASE("suite draws the same count from every benchmark") {
  auto client = echo_client(0ms);
  auto set = samples("x", 300);
  auto more = samples("y", 150);
  set.insert(set.end(), more.begin(), more.end());
  auto results = run_suite(client, set, GenConfig{}, 100, 9);
  auto groups = group_by_benchmark(results);
  REQUIRE(groups.size() == 2);
  CHECK(groups["x"].size() == 100);
  CHECK(groups["y"].size() == 100);
}

TEST_CASE("generation config validation") {
  GenConfig g;
  CHECK(g.temperature == 0.0);
  CHECK(g.max_output_tokens == 4096);
  g.temperature = -1;
  CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("aggregate is a macro average") {
  auto make = [](const std::string& bench, int n, int correct, double latency) {
    std::vector<EvalResult> v;
    for (int i = 0; i < n; ++i) {
      EvalResult r;
      r.benchmark = bench;
      r.score = i < correct ? 1 : 0;
      r.latency_ms = latency;
      r.output_tokens = 10;
      v.push_back(r);
    }
    return v;
  };
  std::map<std::string, std::vector<EvalResult>> g{{"a", make("a", 10, 8, 100)}, {"b", make("b", 10, 6, 300)}};
  auto s = aggregate(g);
  CHECK(s.accuracy == doctest::Approx(70.0));
  CHECK(s.mean_latency_ms == doctest::Approx(200.0));

  std::map<std::string, std::vector<EvalResult>> sizes{{"a", make("a", 100, 80, 1)}, {"b", make("b", 10, 6, 1)}};
  auto macro = aggregate(sizes);
  CHECK(macro.accuracy == doctest::Approx(70.0));  // micro would be 86/110

  std::map<std::string, std::vector<EvalResult>> one{{"a", make("a", 4, 3, 1)}};
  CHECK(aggregate(one).accuracy == doctest::Approx(75.0));

  std::map<std::string, std::vector<EvalResult>> with_empty{{"a", make("a", 4, 3, 1)}, {"b", {}}};
  auto w = aggregate(with_empty);
  CHECK(w.benchmarks.size() == 1);
  CHECK(w.warnings.size() == 1);
  CHECK(w.accuracy == doctest::Approx(75.0));
}

TEST_CASE("pareto fixtures") {
  std::vector<ParetoPoint> one{{"m", 3, 40}};
  CHECK(compute_pareto(one) == std::vector<std::size_t>{0});
  std::vector<ParetoPoint> three{{"a", 1, 50}, {"b", 2, 60}, {"c", 3, 55}};
  CHECK(compute_pareto(three) == std::vector<std::size_t>{0, 1});
  std::vector<ParetoPoint> dup{{"a", 1, 50}, {"b", 1, 50}};
  CHECK(compute_pareto(dup) == std::vector<std::size_t>{0, 1});
  std::vector<ParetoPoint> nan{{"a", std::nan(""), 50}};
  CHECK_THROWS_AS(compute_pareto(nan), InputError);
  CHECK(compute_pareto(std::vector<ParetoPoint>{}).empty());
}

TEST_CASE("pareto agrees with pairwise dominance") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 300; ++t) {
    std::vector<ParetoPoint> pts;
    const std::size_t n = rng() % 60;
    for (std::size_t i = 0; i < n; ++i) {
      pts.push_back({"p", static_cast<double>(rng() % 20), static_cast<double>(rng() % 20)});
    }
    CHECK(compute_pareto(pts) == oracle::pareto(pts));
  }
}

TEST_CASE("reports") {
  const auto dir = std::filesystem::temp_directory_path() / "mmtk_eval_report";
  std::filesystem::create_directories(dir);
  const std::string csv = (dir / "r.csv").string(), svg = (dir / "r.svg").string();

  emit_report({}, {}, {}, CostAxis::Latency, csv, svg);
  std::ifstream c0(csv);
  std::string header, extra;
  std::getline(c0, header);
  CHECK(header == "model,benchmark,accuracy,mean_latency_ms,mean_output_tokens");
  CHECK_FALSE(std::getline(c0, extra));
  std::ifstream s0(svg);
  std::string empty_svg((std::istreambuf_iterator<char>(s0)), {});
  CHECK(count(empty_svg, "<circle") == 0);

  std::vector<ParetoPoint> pts{{"a", 1, 50}, {"b", 2, 60}, {"c", 3, 55}};
  auto frontier = compute_pareto(pts);
  const std::string doc = render_svg(pts, frontier, CostAxis::Tokens, "server");
  CHECK(count(doc, "class=\"frontier\"") == 2);
  CHECK(doc.find("<desc>") != std::string::npos);
  CHECK(render_svg(pts, frontier, CostAxis::Tokens, "server") == doc);

  std::vector<ModelSummary> models;
  for (const char* name : {"m1", "m2"}) {
    ModelSummary m{name, {}, "server"};
    for (const char* b : {"x", "y", "z"}) m.summary.benchmarks.push_back({b, 1, 50, 10, 5});
    models.push_back(m);
  }
  const std::string table = render_csv(models);
  CHECK(count(table, "\n") == 1 + 2 * 3 + 2);  // header, rows, one overall row per model
  CHECK_THROWS_AS(emit_report(models, pts, frontier, CostAxis::Latency, "/nonexistent/dir/r.csv", svg),
                  FilesystemError);
}

TEST_CASE("result rows round trip") {
  EvalResult r{"id1", "b", "<nothink>x", 1, 12.5, 3, TokenSource::Server, false, false, ""};
  auto back = EvalResult::from_json(nlohmann::json::parse(r.to_json().dump()));
  CHECK(back.sample_id == "id1");
  CHECK(back.latency_ms == 12.5);
  CHECK(back.token_source == TokenSource::Server);
}

TEST_CASE("http clients follow the wire contract") {
  httplib::Server server;
  nlohmann::json last_judge, last_model;
  std::string auth;
  server.Post("/judge", [&](const httplib::Request& req, httplib::Response& res) {
    last_judge = nlohmann::json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(R"({"text": "judged"})", "application/json");
  });
  server.Post("/model", [&](const httplib::Request& req, httplib::Response& res) {
    last_model = nlohmann::json::parse(req.body);
    res.set_content(R"({"text": "<nothink>B", "output_tokens": 4})", "application/json");
  });
  server.Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const auto dir = std::filesystem::temp_directory_path() / "mmtk_http_test";
  std::filesystem::create_directories(dir);
  const std::string img = (dir / "img.bin").string();
  std::ofstream(img, std::ios::binary) << "abc";

  const std::string base = "http://127.0.0.1:" + std::to_string(port);
  HttpJudgeClient judge({base + "/judge", "secret", 5});
  std::vector<std::string> refs{img};
  CHECK(judge.generate("describe", refs) == "judged");
  CHECK(last_judge["prompt"] == "describe");
  CHECK(last_judge["images"] == nlohmann::json::array({"YWJj"}));
  CHECK(auth == "Bearer secret");

  HttpModelClient model({base + "/model", "", 5});
  auto c = model.complete({"q", {img}, 4096, 0.0});
  CHECK(c.text == "<nothink>B");
  CHECK(c.output_tokens == 4);
  CHECK(last_model["max_output_tokens"] == 4096);
  CHECK(last_model["temperature"] == 0.0);
  CHECK(last_model["images"].size() == 1);

  HttpModelClient broken({base + "/broken", "", 5});
  CHECK_THROWS_AS(broken.complete({"q", {}, 16, 0.0}), TransportError);
  HttpModelClient closed({"http://127.0.0.1:1/x", "", 1});
  CHECK_THROWS_AS(closed.complete({"q", {}, 16, 0.0}), TransportError);

  server.stop();
  th.join();
}
