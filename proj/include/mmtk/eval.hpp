#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mmtk/judge.hpp"
#include "mmtk/record.hpp"
#include "mmtk/vision.hpp"

namespace mmtk {

enum class Decoding { Greedy };

struct GenConfig {
  double temperature = 0.0;
  Decoding decoding = Decoding::Greedy;
  std::int64_t max_output_tokens = 4096;

  void validate() const;
};

enum class TaskKind { ExactMatch, MultipleChoice, RelaxedNumeric, PointInBox };
std::string_view to_string(TaskKind k);
std::optional<TaskKind> parse_task_kind(std::string_view s);

using Reference = std::variant<std::string, NormRect>;

struct EvalSample {
  std::string id;
  std::string benchmark;
  TaskKind task_kind = TaskKind::ExactMatch;
  std::string prompt;
  std::vector<std::string> images;
  Reference reference;
};

// Reads meta.benchmark and meta.task_kind; the reference is the first rect
// annotation for point_in_box and `final` otherwise.
EvalSample eval_sample_from_record(const SampleRecord& rec);

enum class TokenSource { Server, Fallback };
std::string_view to_string(TokenSource s);

struct EvalResult {
  std::string sample_id;
  std::string benchmark;
  std::string prediction;
  int score = 0;
  double latency_ms = 0.0;
  std::int64_t output_tokens = 0;
  TokenSource token_source = TokenSource::Fallback;
  bool parse_failure = false;
  bool error = false;
  std::string error_message;

  nlohmann::ordered_json to_json() const;
  static EvalResult from_json(const nlohmann::json& j);
};

// ---------------------------------------------------------------------------
// Model client

struct ModelRequest {
  std::string prompt;
  std::vector<std::string> images;
  std::int64_t max_output_tokens = 4096;
  double temperature = 0.0;
};

struct Completion {
  std::string text;
  std::optional<std::int64_t> output_tokens;  // server-reported
};

class ModelClient {
 public:
  virtual ~ModelClient() = default;
  virtual Completion complete(const ModelRequest& request) = 0;
};

// Wire format: the judge request plus {"max_output_tokens", "temperature"};
// response {"text", "output_tokens"}.
nlohmann::json model_request_json(const ModelRequest& request, std::span<const std::string> images_base64);
Completion completion_from_json(const nlohmann::json& response);

class HttpModelClient : public ModelClient {
 public:
  explicit HttpModelClient(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  Completion complete(const ModelRequest& request) override;

 private:
  HttpEndpoint endpoint_;
};

// Answers through a callback after a programmed delay. Tracks the largest
// number of requests it ever saw in flight at once.
class MockModelClient : public ModelClient {
 public:
  using Responder = std::function<Completion(const ModelRequest&)>;

  MockModelClient(Responder responder, std::chrono::milliseconds delay)
      : responder_(std::move(responder)), delay_(delay) {}

  Completion complete(const ModelRequest& request) override;

  void set_delay(std::chrono::milliseconds d) { delay_ = d; }
  std::size_t calls() const { return calls_.load(); }
  int max_in_flight() const { return max_in_flight_.load(); }

 private:
  Responder responder_;
  std::chrono::milliseconds delay_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
  std::atomic<std::size_t> calls_{0};
};

// Fallback output-token count: alphanumeric runs plus punctuation characters.
std::int64_t approx_token_count(std::string_view text);

// ---------------------------------------------------------------------------
// Runner

struct RunOptions {
  bool fail_fast = false;
  std::function<std::int64_t(std::string_view)> token_counter = approx_token_count;
  double relaxed_tolerance = 0.05;
};

// Seeded subset of subset_size samples, dispatched strictly one at a time.
// Latency is wall-clock around the whole request/response on a monotonic clock.
std::vector<EvalResult> run_benchmark(ModelClient& client, std::span<const EvalSample> samples, const GenConfig& gen,
                                      std::size_t subset_size, std::uint64_t seed, const RunOptions& opts = {});

// run_benchmark per benchmark name, each with its own derived seed.
std::vector<EvalResult> run_suite(ModelClient& client, std::span<const EvalSample> samples, const GenConfig& gen,
                                  std::size_t per_benchmark, std::uint64_t seed, const RunOptions& opts = {});

// The answer part of a model response: the final after any think block.
std::string extract_answer(std::string_view prediction);

struct ScoreOutcome {
  int score = 0;
  bool parse_failure = false;
};

ScoreOutcome score_sample(TaskKind kind, std::string_view prediction, const Reference& reference,
                          double relaxed_tolerance = 0.05);

// Final standalone option letter (A-J) or nullopt.
std::optional<char> extract_choice(std::string_view text);

// ---------------------------------------------------------------------------
// Aggregation and Pareto

struct BenchmarkStats {
  std::string benchmark;
  std::size_t n = 0;
  double accuracy = 0.0;  // percent
  double mean_latency_ms = 0.0;
  double mean_output_tokens = 0.0;
};

struct Summary {
  std::vector<BenchmarkStats> benchmarks;  // sorted by name
  double accuracy = 0.0;                   // unweighted mean over benchmarks
  double mean_latency_ms = 0.0;
  double mean_output_tokens = 0.0;
  std::vector<std::string> warnings;
};

std::map<std::string, std::vector<EvalResult>> group_by_benchmark(std::span<const EvalResult> results);
Summary aggregate(const std::map<std::string, std::vector<EvalResult>>& groups);

struct ParetoPoint {
  std::string label;
  double cost = 0.0;
  double accuracy = 0.0;
};

// Indices of non-dominated points, sorted by cost. Throws InputError on
// non-finite values.
std::vector<std::size_t> compute_pareto(std::span<const ParetoPoint> points);

// ---------------------------------------------------------------------------
// Reports

enum class CostAxis { Latency, Tokens };
std::string_view to_string(CostAxis a);

struct ModelSummary {
  std::string model;
  Summary summary;
  std::string token_source;  // "server", "fallback" or "mixed"
};

ParetoPoint pareto_point(const ModelSummary& m, CostAxis axis);

std::string render_csv(std::span<const ModelSummary> models);
std::string render_svg(std::span<const ParetoPoint> points, std::span<const std::size_t> frontier, CostAxis axis,
                       std::string_view token_source_note = {});

// Writes both files; FilesystemError when a path cannot be written.
void emit_report(std::span<const ModelSummary> models, std::span<const ParetoPoint> points,
                 std::span<const std::size_t> frontier, CostAxis axis, const std::string& csv_path,
                 const std::string& svg_path);

}  // namespace mmtk
