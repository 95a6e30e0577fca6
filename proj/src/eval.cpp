#include "mmtk/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "mmtk/error.hpp"
#include "mmtk/rng.hpp"
#include "mmtk/text.hpp"
#include "mmtk/transcript.hpp"

namespace mmtk {

void GenConfig::validate() const {
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw ConfigError("temperature must be >= 0");
  if (max_output_tokens <= 0) throw ConfigError("max_output_tokens must be > 0");
}

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::ExactMatch: return "exact_match";
    case TaskKind::MultipleChoice: return "multiple_choice";
    case TaskKind::RelaxedNumeric: return "relaxed_numeric";
    case TaskKind::PointInBox: return "point_in_box";
  }
  return "exact_match";
}

std::optional<TaskKind> parse_task_kind(std::string_view s) {
  for (TaskKind k : {TaskKind::ExactMatch, TaskKind::MultipleChoice, TaskKind::RelaxedNumeric, TaskKind::PointInBox}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

std::string_view to_string(TokenSource s) { return s == TokenSource::Server ? "server" : "fallback"; }

std::string_view to_string(CostAxis a) { return a == CostAxis::Latency ? "latency" : "tokens"; }

EvalSample eval_sample_from_record(const SampleRecord& rec) {
  EvalSample s;
  s.id = rec.id;
  s.images = rec.images;
  s.prompt = rec.last_user_text();
  const auto& meta = rec.meta;
  if (!meta.is_object() || !meta.contains("benchmark") || !meta["benchmark"].is_string()) {
    throw InputError("record " + rec.id + ": meta.benchmark missing");
  }
  s.benchmark = meta["benchmark"].get<std::string>();
  const std::string kind = meta.value("task_kind", std::string("exact_match"));
  auto parsed = parse_task_kind(kind);
  if (!parsed) throw InputError("record " + rec.id + ": unknown task_kind '" + kind + "'");
  s.task_kind = *parsed;
  if (s.task_kind == TaskKind::PointInBox) {
    if (rec.annotations) {
      for (const auto& a : *rec.annotations) {
        if (a.kind == AnnotationKind::Rect) {
          s.reference = NormRect{a.coords[0], a.coords[1], a.coords[2], a.coords[3]};
          return s;
        }
      }
    }
    throw InputError("record " + rec.id + ": point_in_box needs a rect annotation");
  }
  s.reference = rec.final;
  return s;
}

nlohmann::ordered_json EvalResult::to_json() const {
  nlohmann::ordered_json j;
  j["id"] = sample_id;
  j["benchmark"] = benchmark;
  j["prediction"] = prediction;
  j["score"] = score;
  j["latency_ms"] = latency_ms;
  j["output_tokens"] = output_tokens;
  j["token_source"] = std::string(to_string(token_source));
  j["parse_failure"] = parse_failure;
  j["error"] = error;
  if (error) j["error_message"] = error_message;
  return j;
}

EvalResult EvalResult::from_json(const nlohmann::json& j) {
  try {
    EvalResult r;
    r.sample_id = j.at("id").get<std::string>();
    r.benchmark = j.at("benchmark").get<std::string>();
    r.prediction = j.value("prediction", std::string());
    r.score = j.at("score").get<int>();
    r.latency_ms = j.at("latency_ms").get<double>();
    r.output_tokens = j.at("output_tokens").get<std::int64_t>();
    r.token_source = j.value("token_source", std::string("fallback")) == "server" ? TokenSource::Server
                                                                                 : TokenSource::Fallback;
    r.parse_failure = j.value("parse_failure", false);
    r.error = j.value("error", false);
    r.error_message = j.value("error_message", std::string());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad result row: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

nlohmann::json model_request_json(const ModelRequest& request, std::span<const std::string> images_base64) {
  nlohmann::json j = judge_request_json(request.prompt, images_base64);
  j["max_output_tokens"] = request.max_output_tokens;
  j["temperature"] = request.temperature;
  return j;
}

Completion completion_from_json(const nlohmann::json& response) {
  Completion c;
  c.text = judge_response_text(response);
  if (response.contains("output_tokens") && response["output_tokens"].is_number_integer()) {
    c.output_tokens = response["output_tokens"].get<std::int64_t>();
  }
  return c;
}

Completion HttpModelClient::complete(const ModelRequest& request) {
  std::vector<std::string> encoded;
  encoded.reserve(request.images.size());
  for (const auto& path : request.images) encoded.push_back(base64_encode(read_file_bytes(path)));
  return completion_from_json(http_post_json(endpoint_, model_request_json(request, encoded)));
}

Completion MockModelClient::complete(const ModelRequest& request) {
  const int now = ++in_flight_;
  int seen = max_in_flight_.load();
  while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
  }
  ++calls_;
  struct Leave {
    std::atomic<int>& n;
    ~Leave() { --n; }
  } leave{in_flight_};
  if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
  return responder_(request);
}

std::int64_t approx_token_count(std::string_view text) {
  std::int64_t n = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isalnum(c) || c >= 0x80) {
      while (i < text.size() && (std::isalnum(static_cast<unsigned char>(text[i])) ||
                                 static_cast<unsigned char>(text[i]) >= 0x80)) {
        ++i;
      }
      ++n;
    } else {
      if (!std::isspace(c)) ++n;
      ++i;
    }
  }
  return n;
}

// ---------------------------------------------------------------------------

std::vector<EvalResult> run_benchmark(ModelClient& client, std::span<const EvalSample> samples, const GenConfig& gen,
                                      std::size_t subset_size, std::uint64_t seed, const RunOptions& opts) {
  gen.validate();
  if (subset_size > samples.size()) {
    throw InputError("subset of " + std::to_string(subset_size) + " requested from " +
                     std::to_string(samples.size()) + " samples");
  }
  Rng rng(seed);
  const auto picked = sample_without_replacement(rng, samples.size(), subset_size);

  std::vector<EvalResult> results;
  results.reserve(picked.size());
  for (std::size_t idx : picked) {
    const EvalSample& s = samples[idx];
    EvalResult r;
    r.sample_id = s.id;
    r.benchmark = s.benchmark;
    ModelRequest req{s.prompt, s.images, gen.max_output_tokens, gen.temperature};
    try {
      const auto t0 = std::chrono::steady_clock::now();
      Completion c = client.complete(req);
      const auto t1 = std::chrono::steady_clock::now();
      r.latency_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      r.prediction = std::move(c.text);
      if (c.output_tokens) {
        r.output_tokens = *c.output_tokens;
        r.token_source = TokenSource::Server;
      } else {
        r.output_tokens = opts.token_counter(r.prediction);
        r.token_source = TokenSource::Fallback;
      }
      const ScoreOutcome o = score_sample(s.task_kind, r.prediction, s.reference, opts.relaxed_tolerance);
      r.score = o.score;
      r.parse_failure = o.parse_failure;
    } catch (const Error& e) {
      if (opts.fail_fast) throw;
      r.error = true;
      r.error_message = e.what();
      r.score = 0;
    }
    results.push_back(std::move(r));
  }
  return results;
}

std::vector<EvalResult> run_suite(ModelClient& client, std::span<const EvalSample> samples, const GenConfig& gen,
                                  std::size_t per_benchmark, std::uint64_t seed, const RunOptions& opts) {
  std::map<std::string, std::vector<EvalSample>> by_name;
  for (const auto& s : samples) by_name[s.benchmark].push_back(s);
  std::vector<EvalResult> out;
  for (const auto& [name, group] : by_name) {
    auto part = run_benchmark(client, group, gen, per_benchmark, derive_seed(seed, name), opts);
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string extract_answer(std::string_view prediction) {
  const ParsedResponse p = parse_transcript(prediction);
  if (p.mode != ResponseMode::Malformed) return p.final;
  // Outputs without mode tokens are scored as plain text; an unclosed think
  // block has no answer.
  if (!p.final.empty()) return p.final;
  if (p.think) return {};
  return std::string(text::trim(prediction));
}

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

struct LetterHit {
  std::size_t pos;
  char letter;
  bool strong;
};

std::vector<LetterHit> letter_hits(std::string_view t) {
  std::vector<LetterHit> hits;
  for (std::size_t i = 0; i < t.size(); ++i) {
    char c = t[i];
    if (c < 'A' || c > 'J') continue;
    const char prev = i > 0 ? t[i - 1] : ' ';
    const char next = i + 1 < t.size() ? t[i + 1] : ' ';
    if (is_alnum(prev) || is_alnum(next) || prev == '\'' || next == '\'') continue;
    const bool bracketed = (prev == '(' || prev == '[') && (next == ')' || next == ']');
    const bool punctuated = next == ')' || next == '.' || next == ':' || i + 1 == t.size();
    hits.push_back({i, c, bracketed || punctuated});
  }
  return hits;
}

}  // namespace

std::optional<char> extract_choice(std::string_view text_in) {
  const std::string_view t = text::trim(text_in);
  const auto hits = letter_hits(t);
  if (hits.empty()) return std::nullopt;

  // A letter right after an answer cue wins.
  static const char* cues[] = {"answer is", "answer:", "option", "choice"};
  std::optional<LetterHit> cued;
  for (const auto& h : hits) {
    for (const char* cue : cues) {
      const std::string_view cv(cue);
      const std::size_t at = text::rfind_icase(t.substr(0, h.pos), cv);
      if (at == std::string_view::npos) continue;
      std::string_view gap = t.substr(at + cv.size(), h.pos - at - cv.size());
      bool ok = gap.size() <= 3;
      for (char g : gap) ok = ok && (g == ' ' || g == '(' || g == '[' || g == ':');
      if (ok) cued = h;
    }
  }
  if (cued) return cued->letter;
  for (auto it = hits.rbegin(); it != hits.rend(); ++it) {
    if (it->strong) return it->letter;
  }
  return hits.back().letter;
}

ScoreOutcome score_sample(TaskKind kind, std::string_view prediction, const Reference& reference,
                          double relaxed_tolerance) {
  const std::string answer = extract_answer(prediction);
  ScoreOutcome out;
  if (kind == TaskKind::PointInBox) {
    const auto* box = std::get_if<NormRect>(&reference);
    if (box == nullptr) throw InputError("point_in_box needs a box reference");
    const auto nums = text::extract_numbers(answer);
    if (nums.size() < 2) {
      out.parse_failure = true;
      return out;
    }
    out.score = box->contains(NormPoint{nums[0], nums[1]}) ? 1 : 0;
    return out;
  }
  const auto* ref = std::get_if<std::string>(&reference);
  if (ref == nullptr) throw InputError(std::string(to_string(kind)) + " needs a text reference");

  switch (kind) {
    case TaskKind::ExactMatch:
      out.score = text::casefold(text::trim(answer)) == text::casefold(text::trim(*ref)) ? 1 : 0;
      break;
    case TaskKind::MultipleChoice: {
      const auto want = extract_choice(*ref);
      if (!want) throw InputError("reference has no option letter: " + *ref);
      const auto got = extract_choice(answer);
      if (!got) {
        out.parse_failure = true;
      } else {
        out.score = *got == *want ? 1 : 0;
      }
      break;
    }
    case TaskKind::RelaxedNumeric: {
      auto want = text::parse_number(*ref);
      if (!want) {
        const auto ref_nums = text::extract_numbers(*ref);
        if (ref_nums.empty()) throw InputError("reference is not numeric: " + *ref);
        want = ref_nums.front();
      }
      const auto nums = text::extract_numbers(answer);
      if (nums.empty()) {
        out.parse_failure = true;
      } else {
        const double got = nums.back();
        const double slack = relaxed_tolerance * std::fabs(*want);
        out.score = std::fabs(got - *want) <= slack * (1 + 1e-12) ? 1 : 0;
      }
      break;
    }
    case TaskKind::PointInBox: break;
  }
  return out;
}

// ---------------------------------------------------------------------------

std::map<std::string, std::vector<EvalResult>> group_by_benchmark(std::span<const EvalResult> results) {
  std::map<std::string, std::vector<EvalResult>> groups;
  for (const auto& r : results) groups[r.benchmark].push_back(r);
  return groups;
}

Summary aggregate(const std::map<std::string, std::vector<EvalResult>>& groups) {
  Summary s;
  for (const auto& [name, rows] : groups) {
    if (rows.empty()) {
      s.warnings.push_back("benchmark " + name + " has no results; excluded");
      continue;
    }
    BenchmarkStats b;
    b.benchmark = name;
    b.n = rows.size();
    double correct = 0, lat = 0, tok = 0;
    for (const auto& r : rows) {
      correct += r.score;
      lat += r.latency_ms;
      tok += static_cast<double>(r.output_tokens);
    }
    const double n = static_cast<double>(rows.size());
    b.accuracy = 100.0 * correct / n;
    b.mean_latency_ms = lat / n;
    b.mean_output_tokens = tok / n;
    s.benchmarks.push_back(b);
  }
  if (!s.benchmarks.empty()) {
    const double k = static_cast<double>(s.benchmarks.size());
    for (const auto& b : s.benchmarks) {
      s.accuracy += b.accuracy / k;
      s.mean_latency_ms += b.mean_latency_ms / k;
      s.mean_output_tokens += b.mean_output_tokens / k;
    }
  }
  return s;
}

std::vector<std::size_t> compute_pareto(std::span<const ParetoPoint> points) {
  for (const auto& p : points) {
    if (!std::isfinite(p.cost) || !std::isfinite(p.accuracy)) {
      throw InputError("non-finite value in Pareto point '" + p.label + "'");
    }
  }
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  // Cheapest first; at equal cost the most accurate first.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].cost != points[b].cost) return points[a].cost < points[b].cost;
    return points[a].accuracy > points[b].accuracy;
  });
  std::vector<std::size_t> frontier;
  bool any = false;
  double best = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    const double cost = points[order[i]].cost;
    const double top = points[order[i]].accuracy;
    while (j < order.size() && points[order[j]].cost == cost) ++j;
    if (!any || top > best) {
      for (std::size_t k = i; k < j && points[order[k]].accuracy == top; ++k) frontier.push_back(order[k]);
      best = top;
      any = true;
    }
    i = j;
  }
  return frontier;
}

// ---------------------------------------------------------------------------

ParetoPoint pareto_point(const ModelSummary& m, CostAxis axis) {
  return {m.model, axis == CostAxis::Latency ? m.summary.mean_latency_ms : m.summary.mean_output_tokens,
          m.summary.accuracy};
}

namespace {

std::string csv_field(std::string_view v) {
  if (v.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(v);
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string xml_escape(std::string_view v) {
  std::string out;
  for (char c : v) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FilesystemError("cannot open " + path + " for writing");
  f << content;
  f.close();
  if (!f) throw FilesystemError("failed writing " + path);
}

}  // namespace

std::string render_csv(std::span<const ModelSummary> models) {
  std::string out = "model,benchmark,accuracy,mean_latency_ms,mean_output_tokens\n";
  auto row = [&](const std::string& model, const std::string& bench, double acc, double lat, double tok) {
    out += csv_field(model) + "," + csv_field(bench) + "," + text::format_fixed(acc, 4) + "," +
           text::format_fixed(lat, 4) + "," + text::format_fixed(tok, 4) + "\n";
  };
  for (const auto& m : models) {
    for (const auto& b : m.summary.benchmarks) {
      row(m.model, b.benchmark, b.accuracy, b.mean_latency_ms, b.mean_output_tokens);
    }
    row(m.model, "overall", m.summary.accuracy, m.summary.mean_latency_ms, m.summary.mean_output_tokens);
  }
  return out;
}

std::string render_svg(std::span<const ParetoPoint> points, std::span<const std::size_t> frontier, CostAxis axis,
                       std::string_view token_source_note) {
  constexpr double W = 640, H = 480, L = 70, R = 30, T = 30, B = 60;
  double lo = 0, hi = 1;
  if (!points.empty()) {
    lo = hi = points.front().cost;
    for (const auto& p : points) {
      lo = std::min(lo, p.cost);
      hi = std::max(hi, p.cost);
    }
  }
  auto px = [&](double cost) {
    if (hi == lo) return L + (W - L - R) / 2;
    return L + (cost - lo) / (hi - lo) * (W - L - R);
  };
  auto py = [&](double acc) { return T + (100.0 - std::clamp(acc, 0.0, 100.0)) / 100.0 * (H - T - B); };
  auto f2 = [](double v) { return text::format_fixed(v, 2); };

  const std::set<std::size_t> on_front(frontier.begin(), frontier.end());
  const std::string x_label = axis == CostAxis::Latency ? "mean latency (ms)" : "mean output tokens";

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << " " << H << "\">\n";
  s << "<desc>cost axis: " << to_string(axis);
  if (!token_source_note.empty()) s << "; output tokens: " << xml_escape(token_source_note);
  s << "</desc>\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  s << "<line class=\"axis\" x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  s << "<line class=\"axis\" x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << x_label
    << "</text>\n";
  s << "<text x=\"20\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
    << (T + H - B) / 2 << ")\">accuracy (%)</text>\n";
  s << "<text x=\"" << L << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << text::format_number(lo)
    << "</text>\n";
  s << "<text x=\"" << W - R << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << text::format_number(hi)
    << "</text>\n";

  if (!frontier.empty()) {
    s << "<polyline class=\"frontier-line\" fill=\"none\" stroke=\"#c0392b\" points=\"";
    for (std::size_t k = 0; k < frontier.size(); ++k) {
      if (k) s << ' ';
      s << f2(px(points[frontier[k]].cost)) << ',' << f2(py(points[frontier[k]].accuracy));
    }
    s << "\"/>\n";
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    const bool f = on_front.count(i) > 0;
    s << "<circle class=\"" << (f ? "frontier" : "dominated") << "\" cx=\"" << f2(px(points[i].cost)) << "\" cy=\""
      << f2(py(points[i].accuracy)) << "\" r=\"5\" fill=\"" << (f ? "#c0392b" : "#7f8c8d") << "\"><title>"
      << xml_escape(points[i].label) << "</title></circle>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void emit_report(std::span<const ModelSummary> models, std::span<const ParetoPoint> points,
                 std::span<const std::size_t> frontier, CostAxis axis, const std::string& csv_path,
                 const std::string& svg_path) {
  std::set<std::string> sources;
  for (const auto& m : models) sources.insert(m.token_source);
  std::string note;
  if (sources.size() == 1) note = *sources.begin();
  else if (sources.size() > 1) note = "mixed";
  write_file(csv_path, render_csv(models));
  write_file(svg_path, render_svg(points, frontier, axis, note));
}

}  // namespace mmtk
