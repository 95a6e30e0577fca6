// mmtk: command-line front end for planning, curation, synthesis, mixing and
// evaluation over JSONL records.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mmtk/curation.hpp"
#include "mmtk/error.hpp"
#include "mmtk/eval.hpp"
#include "mmtk/fusion.hpp"
#include "mmtk/judge.hpp"
#include "mmtk/mixture.hpp"
#include "mmtk/record.hpp"
#include "mmtk/rng.hpp"
#include "mmtk/synth.hpp"
#include "mmtk/text.hpp"
#include "mmtk/transcript.hpp"
#include "mmtk/vision.hpp"

namespace fs = std::filesystem;
using namespace mmtk;

namespace {

// ---------------------------------------------------------------------------
// I/O helpers

class Input {
 public:
  explicit Input(const std::string& path) {
    if (path == "-") {
      stream_ = &std::cin;
    } else {
      file_.open(path, std::ios::binary);
      if (!file_) throw FilesystemError("cannot open " + path);
      stream_ = &file_;
    }
  }
  std::istream& get() { return *stream_; }

 private:
  std::ifstream file_;
  std::istream* stream_ = nullptr;
};

class Output {
 public:
  explicit Output(const std::string& path) {
    if (path == "-") {
      stream_ = &std::cout;
    } else {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw FilesystemError("cannot open " + path + " for writing");
      stream_ = &file_;
    }
  }
  std::ostream& get() { return *stream_; }
  void close() {
    stream_->flush();
    if (!*stream_) throw FilesystemError("write failed");
  }

 private:
  std::ofstream file_;
  std::ostream* stream_ = nullptr;
};

fs::path base_dir(const std::string& input) {
  if (input == "-") return fs::current_path();
  return fs::absolute(input).parent_path();
}

std::string resolve(const fs::path& base, const std::string& ref) {
  const fs::path p(ref);
  return p.is_absolute() ? ref : (base / p).string();
}

// Reads JSONL in batches, maps each line on up to `jobs` threads and hands the
// results to `sink` in input order.
template <class Result>
void map_ordered(std::istream& in, std::size_t jobs, const std::function<Result(const JsonlReader::Line&)>& fn,
                 const std::function<void(Result&)>& sink) {
  jobs = std::max<std::size_t>(1, jobs);
  JsonlReader reader(in);
  const std::size_t batch_size = jobs * 256;
  std::vector<JsonlReader::Line> batch;
  std::vector<Result> results;
  bool more = true;
  while (more) {
    batch.clear();
    JsonlReader::Line line;
    while (batch.size() < batch_size && (more = reader.next(line))) batch.push_back(line);
    if (batch.empty()) break;
    results.assign(batch.size(), Result{});
    if (jobs == 1 || batch.size() == 1) {
      for (std::size_t i = 0; i < batch.size(); ++i) results[i] = fn(batch[i]);
    } else {
      std::vector<std::thread> workers;
      for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&, w] {
          for (std::size_t i = w; i < batch.size(); i += jobs) results[i] = fn(batch[i]);
        });
      }
      for (auto& t : workers) t.join();
    }
    for (auto& r : results) sink(r);
  }
}

std::string describe(const LintIssue& i) {
  std::string s = "record " + i.location.record_id + ": " + std::string(to_string(i.severity)) + " " +
                  std::string(to_string(i.code)) + " in " + i.location.field + " [" +
                  std::to_string(i.location.begin) + "," + std::to_string(i.location.end) + ")";
  if (!i.detail.empty()) s += ": " + i.detail;
  return s;
}

// ---------------------------------------------------------------------------
// plan

struct PlanArgs {
  std::string strategy = "dynres";
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::int64_t patch = 16;
  std::int64_t min_patches = 256;
  std::int64_t max_patches = 3600;
  std::optional<std::int64_t> max_tokens;
  std::optional<std::int64_t> tile;
  std::int64_t tokens_per_tile = 576;
  std::vector<int> scales{1, 2};
  bool json = false;
  std::optional<std::int64_t> layout_text;
  std::int64_t max_seq_len = 16384;
};

int run_plan(const PlanArgs& a) {
  const Strategy strategy = *parse_strategy(a.strategy);
  StrategyConfig cfg;
  cfg.strategy = strategy;
  cfg.patch_px = a.patch;
  cfg.tokens_per_tile = a.tokens_per_tile;
  cfg.s2_scales = a.scales;
  cfg.min_patches = a.min_patches;
  cfg.max_patches = a.max_patches;
  if (strategy == Strategy::DynamicRes) {
    cfg.max_tokens = a.max_tokens.value_or(a.max_patches);
  } else {
    cfg.max_tokens = a.max_tokens.value_or(3600);
    cfg.tile_px = a.tile.value_or(strategy == Strategy::MultiCropS2 ? 1536 : 384);
  }
  const PatchPlan plan = plan_image(a.width, a.height, cfg);

  std::optional<FusedLayout> layout;
  std::vector<LayoutViolation> violations;
  if (a.layout_text) {
    if (*a.layout_text < 0) throw ConfigError("--with-layout needs a non-negative text token count");
    TokenStream stream{ImagePlaceholder{0}};
    for (std::int64_t i = 0; i < *a.layout_text; ++i) stream.push_back(TextToken{i});
    std::vector<PatchPlan> plans{plan};
    layout = assemble_sequence(stream, plans);
    violations = validate_layout(*layout, a.max_seq_len);
  }

  if (a.json) {
    nlohmann::ordered_json out;
    out["plan"] = to_json(plan);
    if (layout) {
      out["layout"] = to_json(*layout);
      auto v = nlohmann::ordered_json::array();
      for (const auto& x : violations) v.push_back({{"rule", std::string(to_string(x.rule))}, {"message", x.message}});
      out["violations"] = v;
    }
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << "strategy " << to_string(strategy) << ": grid " << plan.grid.w << "x" << plan.grid.h << ", resized "
              << plan.resized_size.w << "x" << plan.resized_size.h;
    if (!plan.crops.empty()) std::cout << ", " << plan.crops.size() << " crops";
    std::cout << ", " << plan.token_count << " tokens (budget " << cfg.max_tokens << ")\n";
    if (layout) {
      std::cout << "layout: " << layout->total_len << " tokens";
      for (const auto& s : layout->visual_spans) std::cout << ", image " << s.image_index << " at [" << s.start << ", "
                                                            << s.start + s.length << ")";
      std::cout << "\n";
      for (const auto& v : violations) std::cerr << "layout violation (" << to_string(v.rule) << "): " << v.message << "\n";
    }
  }
  return violations.empty() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// lint

struct LintArgs {
  std::string input = "-";
  std::string report = "-";
  std::vector<std::string> known_tags;
  std::size_t max_tag_distance = 2;
  std::size_t jobs = 1;
};

struct LintLine {
  std::optional<SampleRecord> record;
  std::vector<LintIssue> issues;
  std::string error;
};

int run_lint(const LintArgs& a) {
  LintOptions opts;
  opts.known_tags = a.known_tags;
  opts.max_tag_distance = a.max_tag_distance;
  DatasetSummarizer summary(opts);
  Input in(a.input);
  std::size_t bad_lines = 0;
  bool any_error = false;
  map_ordered<LintLine>(
      in.get(), a.jobs,
      [&](const JsonlReader::Line& line) {
        LintLine out;
        try {
          out.record = parse_record_line(line);
          out.issues = lint_record(*out.record, opts);
        } catch (const Error& e) {
          out.error = e.what();
        }
        return out;
      },
      [&](LintLine& r) {
        if (!r.record) {
          ++bad_lines;
          std::cerr << r.error << "\n";
          return;
        }
        for (const auto& i : r.issues) {
          std::cerr << describe(i) << "\n";
          any_error = any_error || i.severity == Severity::Error;
        }
        summary.add(*r.record, r.issues);
      });
  auto report = summary.finish();
  auto j = report.to_json();
  j["unparseable_lines"] = bad_lines;
  Output out(a.report);
  out.get() << j.dump(2) << "\n";
  out.close();
  return (any_error || bad_lines > 0) ? 1 : 0;
}

// ---------------------------------------------------------------------------
// transform

struct TransformArgs {
  std::string input = "-";
  std::string output = "-";
  bool repair = false;
  bool double_duty = false;
  bool regenerate = false;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> formats;
  std::size_t votes = 3;
  double threshold = 0.5;
  std::size_t attempts = 3;
  std::optional<std::string> description_prompt;
  std::vector<std::string> mock_judge;
  std::size_t jobs = 1;
};

struct TransformLine {
  std::optional<SampleRecord> record;
  std::vector<std::string> notes;
  std::optional<SampleRecord> derived;
  std::string error;
};

int run_transform(const TransformArgs& a) {
  if (!a.repair && !a.double_duty && !a.regenerate) throw ConfigError("nothing to do: pass --repair, --double-duty or --regenerate");
  if (a.double_duty && !a.seed) throw ConfigError("--double-duty requires --seed");

  auto pool = default_template_pool();
  if (!a.formats.empty()) {
    std::vector<FormatTemplate> chosen;
    for (const auto& f : a.formats) {
      auto fmt = parse_answer_format(f);
      if (!fmt) throw ConfigError("unknown answer format '" + f + "'");
      for (const auto& t : pool) {
        if (t.format == *fmt) chosen.push_back(t);
      }
    }
    pool = chosen;
  }

  std::unique_ptr<JudgeClient> judge;
  if (a.regenerate) {
    if (!a.mock_judge.empty()) {
      judge = std::make_unique<MockJudge>(a.mock_judge);
    } else {
      judge = std::make_unique<HttpJudgeClient>(HttpEndpoint::from_env("MMTK_JUDGE"));
    }
  }
  RegenerateOptions regen;
  regen.votes = a.votes;
  regen.threshold = a.threshold;
  regen.attempts = a.attempts;
  regen.description_prompt = a.description_prompt;

  Input in(a.input);
  Output out(a.output);
  std::size_t failures = 0;
  map_ordered<TransformLine>(
      in.get(), a.jobs,
      [&](const JsonlReader::Line& line) {
        TransformLine r;
        try {
          SampleRecord rec = parse_record_line(line);
          if (a.repair) {
            const auto issues = lint_record(rec);
            if (std::any_of(issues.begin(), issues.end(), [](const LintIssue& i) { return i.fixable; })) {
              auto fixed = fix_record(rec, issues);
              for (const auto& f : fixed.fixes) {
                r.notes.push_back("record " + rec.id + ": " + (f.applied ? "fixed " : "skipped ") +
                                  std::string(to_string(f.code)) + (f.detail.empty() ? "" : ": " + f.detail));
              }
              rec = std::move(fixed.record);
              add_provenance(rec, rec.id, "repair", std::nullopt);
            }
          }
          r.record = std::move(rec);
        } catch (const Error& e) {
          r.error = e.what();
        }
        return r;
      },
      [&](TransformLine& r) {
        if (!r.record) {
          ++failures;
          std::cerr << r.error << "\n";
          return;
        }
        for (const auto& n : r.notes) std::cerr << n << "\n";
        SampleRecord rec = std::move(*r.record);
        // Judge calls stay sequential so that scripted judges see a stable order.
        if (judge) {
          auto outcome = regenerate_answer(rec, *judge, regen);
          if (outcome.excluded) std::cerr << "record " << rec.id << ": unverified, tagged excluded\n";
          rec = std::move(outcome.record);
        }
        out.get() << to_jsonl_line(rec) << "\n";
        if (a.double_duty) {
          auto dd = reformat_double_duty(rec, pool, *a.seed);
          if (dd.record) {
            out.get() << to_jsonl_line(*dd.record) << "\n";
          } else {
            std::cerr << "record " << rec.id << ": double-duty skipped: " << dd.skip_reason << "\n";
          }
        }
      });
  out.close();
  return failures > 0 ? 1 : 0;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string input = "-";
  std::string output = "-";
  std::optional<std::uint64_t> seed;
  std::size_t group_size = 5;
  double insert_prob = 0.2;
  double diff_threshold = 16.0 / 255.0;
  bool describer = false;
  bool no_fallback = false;
};

std::vector<CaptionedImage> read_captions(const std::string& path) {
  Input in(path);
  JsonlReader reader(in.get());
  JsonlReader::Line line;
  std::vector<CaptionedImage> items;
  while (reader.next(line)) {
    try {
      const auto j = nlohmann::json::parse(line.text);
      items.push_back({j.at("image").get<std::string>(), j.at("caption").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line.number) + ": " + e.what(), line.byte_offset, line.number);
    }
  }
  return items;
}

SynthConfig synth_config(const SynthArgs& a) {
  SynthConfig cfg;
  cfg.group_size = a.group_size;
  cfg.insert_prob = a.insert_prob;
  cfg.seed = a.seed.value_or(0);
  cfg.diff_threshold = a.diff_threshold;
  cfg.allow_fallback = !a.no_fallback;
  cfg.validate();
  return cfg;
}

int run_synth_groups(const SynthArgs& a, bool scrambled) {
  const SynthConfig cfg = synth_config(a);
  const auto items = read_captions(a.input);
  if (items.size() < 2) throw InputError("need at least 2 captioned images");
  Output out(a.output);
  // Consecutive groups of group_size; a scrambled group may borrow the next
  // item as its sprinkled extra image.
  for (std::size_t start = 0; start + 2 <= items.size(); start += cfg.group_size) {
    const std::size_t end = std::min(items.size(), start + cfg.group_size + (scrambled ? 1 : 0));
    std::vector<CaptionedImage> group(items.begin() + static_cast<std::ptrdiff_t>(start),
                                      items.begin() + static_cast<std::ptrdiff_t>(end));
    const SampleRecord rec = scrambled ? synth_scrambled(group, cfg) : synth_caption_match(group, cfg);
    out.get() << to_jsonl_line(rec) << "\n";
  }
  out.close();
  return 0;
}

int run_synth_changed(const SynthArgs& a) {
  const SynthConfig cfg = synth_config(a);
  std::unique_ptr<JudgeClient> describer;
  if (a.describer) describer = std::make_unique<HttpJudgeClient>(HttpEndpoint::from_env("MMTK_JUDGE"));
  Input in(a.input);
  const fs::path base = base_dir(a.input);
  Output out(a.output);
  JsonlReader reader(in.get());
  JsonlReader::Line line;
  while (reader.next(line)) {
    FrameSequence seq;
    try {
      const auto j = nlohmann::json::parse(line.text);
      seq.frames = j.at("frames").get<std::vector<std::string>>();
      if (j.contains("timestamps")) seq.timestamps = j["timestamps"].get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line.number) + ": " + e.what(), line.byte_offset, line.number);
    }
    std::vector<Image> frames;
    for (const auto& f : seq.frames) frames.push_back(load_image(resolve(base, f)));
    out.get() << to_jsonl_line(synth_whats_changed(seq, frames, describer.get(), cfg)) << "\n";
  }
  out.close();
  return 0;
}

// ---------------------------------------------------------------------------
// mix

struct MixArgs {
  std::string config;
  std::string output = "-";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> draw;
  std::string share_basis = "samples";
};

// Reservoir sample of k records (by line) from a JSONL source, returned in
// source order.
std::vector<std::string> draw_lines(const std::string& path, std::int64_t k, std::uint64_t seed) {
  Input in(path);
  JsonlReader reader(in.get());
  JsonlReader::Line line;
  Rng rng(seed);
  std::vector<std::pair<std::uint64_t, std::string>> reservoir;
  std::uint64_t seen = 0;
  while (reader.next(line)) {
    parse_record_line(line);
    ++seen;
    if (static_cast<std::int64_t>(reservoir.size()) < k) {
      reservoir.emplace_back(seen, line.text);
    } else {
      const std::uint64_t j = uniform_below(rng, seen);
      if (j < static_cast<std::uint64_t>(k)) reservoir[j] = {seen, line.text};
    }
  }
  if (static_cast<std::int64_t>(reservoir.size()) < k) {
    throw InputError(path + " has " + std::to_string(seen) + " records, " + std::to_string(k) + " requested");
  }
  std::sort(reservoir.begin(), reservoir.end());
  std::vector<std::string> out;
  for (auto& [n, text] : reservoir) out.push_back(std::move(text));
  return out;
}

int run_mix(const MixArgs& a) {
  const MixtureConfig cfg = load_mixture_config(a.config);
  MixtureManifest m = plan_mixture(cfg.categories);
  const bool all_avg = std::all_of(m.specs.begin(), m.specs.end(), [](const CategorySpec& s) { return s.avg_tokens.has_value(); });
  if (all_avg || cfg.default_avg_tokens) m.total_tokens = estimate_tokens(m, cfg.default_avg_tokens);
  const ShareBasis basis = a.share_basis == "tokens" ? ShareBasis::Tokens : ShareBasis::Samples;

  nlohmann::ordered_json j = to_json(m);
  if (m.total_samples > 0) {
    const auto share = check_reasoning_share(m, cfg.target_reasoning_share, cfg.reasoning_tolerance, basis,
                                             cfg.default_avg_tokens);
    j["reasoning_check"] = {{"basis", a.share_basis},
                            {"share", share.share},
                            {"target", cfg.target_reasoning_share},
                            {"tolerance", cfg.reasoning_tolerance},
                            {"within", share.within}};
    if (!share.within) {
      std::cerr << "reasoning share " << text::format_fixed(share.share, 4) << " is outside "
                << text::format_number(cfg.target_reasoning_share) << " +/- "
                << text::format_number(cfg.reasoning_tolerance) << "\n";
    }
  }
  Output out(a.output);
  out.get() << j.dump(2) << "\n";
  out.close();

  const bool any_source = std::any_of(m.specs.begin(), m.specs.end(), [](const CategorySpec& s) { return s.source.has_value(); });
  if (a.draw) {
    if (!any_source) throw ConfigError("--draw needs at least one category with a source");
    if (!a.seed) throw ConfigError("--draw requires --seed");
    const fs::path base = fs::absolute(a.config).parent_path();
    Output records(*a.draw);
    for (const auto& s : m.specs) {
      if (!s.source) continue;
      const auto lines = draw_lines(resolve(base, *s.source), s.base_count, derive_seed(*a.seed, s.name));
      for (std::int64_t d = 0; d < s.duplication; ++d) {
        for (const auto& l : lines) records.get() << l << "\n";
      }
    }
    records.close();
  }
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string input;
  std::string output = "-";
  std::optional<std::uint64_t> seed;
  std::size_t subset = 100;
  std::string model = "model";
  std::int64_t max_output_tokens = 4096;
  double temperature = 0.0;
  bool fail_fast = false;
  bool mock = false;
  std::int64_t mock_delay_ms = 0;
  std::optional<std::int64_t> mock_tokens;
  double mock_accuracy = 1.0;
  std::size_t mock_think_words = 0;
};

std::string mock_answer(const EvalSample& s, bool correct) {
  switch (s.task_kind) {
    case TaskKind::PointInBox: {
      const auto& r = std::get<NormRect>(s.reference);
      const double x = correct ? r.x + r.w / 2 : std::fmod(r.x + r.w + 0.25, 1.0);
      const double y = correct ? r.y + r.h / 2 : std::fmod(r.y + r.h + 0.25, 1.0);
      return "(" + text::format_fixed(x, 4) + ", " + text::format_fixed(y, 4) + ")";
    }
    case TaskKind::MultipleChoice: {
      const auto letter = extract_choice(std::get<std::string>(s.reference)).value_or('A');
      return std::string("The answer is (") + (correct ? letter : static_cast<char>(letter == 'A' ? 'B' : 'A')) + ").";
    }
    case TaskKind::RelaxedNumeric: {
      const auto v = text::parse_number(std::get<std::string>(s.reference)).value_or(0.0);
      return text::format_number(correct ? v : v * 1.5 + 1);
    }
    case TaskKind::ExactMatch: return correct ? std::get<std::string>(s.reference) : std::string("unsure");
  }
  return {};
}

int run_eval(const EvalArgs& a) {
  if (!a.seed) throw ConfigError("eval requires --seed");
  Input in(a.input);
  std::vector<EvalSample> samples;
  {
    JsonlReader reader(in.get());
    JsonlReader::Line line;
    while (reader.next(line)) samples.push_back(eval_sample_from_record(parse_record_line(line)));
  }

  std::unique_ptr<ModelClient> client;
  if (a.mock) {
    // Keyed by images and prompt: prompts alone repeat across samples.
    auto key = [](const std::vector<std::string>& images, const std::string& prompt) {
      std::string k;
      for (const auto& i : images) k += i + '\n';
      return k + prompt;
    };
    std::map<std::string, EvalSample> by_prompt;
    for (const auto& s : samples) by_prompt.emplace(key(s.images, s.prompt), s);
    const std::uint64_t seed = *a.seed;
    auto responder = [by_prompt, key, seed, a](const ModelRequest& r) {
      auto it = by_prompt.find(key(r.images, r.prompt));
      if (it == by_prompt.end()) return Completion{"<nothink>unknown", a.mock_tokens};
      Rng rng(derive_seed(seed, a.model + "|" + it->second.id));
      const bool correct = uniform_unit(rng) < a.mock_accuracy;
      std::string text;
      if (a.mock_think_words > 0) {
        text = "<think>";
        for (std::size_t i = 0; i < a.mock_think_words; ++i) text += i ? " step" : "step";
        text += "</think>\n";
      } else {
        text = "<nothink>";
      }
      return Completion{text + mock_answer(it->second, correct), a.mock_tokens};
    };
    client = std::make_unique<MockModelClient>(responder, std::chrono::milliseconds(a.mock_delay_ms));
  } else {
    client = std::make_unique<HttpModelClient>(HttpEndpoint::from_env("MMTK_MODEL"));
  }

  GenConfig gen;
  gen.max_output_tokens = a.max_output_tokens;
  gen.temperature = a.temperature;
  RunOptions opts;
  opts.fail_fast = a.fail_fast;
  const auto results = run_suite(*client, samples, gen, a.subset, *a.seed, opts);

  Output out(a.output);
  std::size_t errors = 0;
  for (const auto& r : results) {
    auto j = r.to_json();
    j["model"] = a.model;
    out.get() << j.dump() << "\n";
    if (r.error) {
      ++errors;
      std::cerr << "sample " << r.sample_id << ": " << r.error_message << "\n";
    }
  }
  out.close();

  const Summary s = aggregate(group_by_benchmark(results));
  for (const auto& w : s.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& b : s.benchmarks) {
    std::cerr << a.model << " " << b.benchmark << ": accuracy " << text::format_fixed(b.accuracy, 2) << "%, "
              << text::format_fixed(b.mean_latency_ms, 1) << " ms, " << text::format_fixed(b.mean_output_tokens, 1)
              << " tokens (n=" << b.n << ")\n";
  }
  return errors > 0 ? 1 : 0;
}

// ---------------------------------------------------------------------------
// pareto

struct ParetoArgs {
  std::vector<std::string> results;
  std::string cost = "latency";
  std::string csv;
  std::string svg;
};

int run_pareto(const ParetoArgs& a) {
  const CostAxis axis = a.cost == "tokens" ? CostAxis::Tokens : CostAxis::Latency;
  std::vector<ModelSummary> models;
  for (const auto& spec : a.results) {
    std::string name, path = spec;
    if (const auto eq = spec.find('='); eq != std::string::npos) {
      name = spec.substr(0, eq);
      path = spec.substr(eq + 1);
    }
    Input in(path);
    JsonlReader reader(in.get());
    JsonlReader::Line line;
    std::vector<EvalResult> rows;
    std::set<std::string> sources;
    while (reader.next(line)) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line.text);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + " line " + std::to_string(line.number) + ": " + e.what(), line.byte_offset, line.number);
      }
      if (name.empty() && j.contains("model")) name = j["model"].get<std::string>();
      rows.push_back(EvalResult::from_json(j));
      sources.insert(std::string(to_string(rows.back().token_source)));
    }
    if (name.empty()) name = fs::path(path).stem().string();
    ModelSummary m{name, aggregate(group_by_benchmark(rows)),
                   sources.size() == 1 ? *sources.begin() : (sources.empty() ? "none" : "mixed")};
    for (const auto& w : m.summary.warnings) std::cerr << name << ": warning: " << w << "\n";
    models.push_back(std::move(m));
  }
  std::vector<ParetoPoint> points;
  for (const auto& m : models) points.push_back(pareto_point(m, axis));
  const auto frontier = compute_pareto(points);
  emit_report(models, points, frontier, axis, a.csv, a.svg);
  for (std::size_t i : frontier) {
    std::cout << "frontier: " << points[i].label << " (" << to_string(axis) << " " << text::format_fixed(points[i].cost, 2)
              << ", accuracy " << text::format_fixed(points[i].accuracy, 2) << ")\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal training-data and evaluation toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  app.set_config("--config", "", "Options file with one [subcommand] section each (flags override it)");
  app.allow_config_extras(CLI::config_extras_mode::error);

  PlanArgs plan;
  auto* p = app.add_subcommand("plan", "Plan visual tokenization for one image");
  p->add_option("--strategy", plan.strategy, "dynres | dynamic-s2 | multicrop | multicrop-s2")
      ->check(CLI::IsMember({"dynres", "dynamic-s2", "multicrop", "multicrop-s2"}))
      ->capture_default_str();
  p->add_option("--width", plan.width, "Image width in pixels")->required();
  p->add_option("--height", plan.height, "Image height in pixels")->required();
  p->add_option("--patch", plan.patch, "Patch size in pixels")->capture_default_str();
  p->add_option("--min-patches", plan.min_patches, "Minimum patches (dynres)")->capture_default_str();
  p->add_option("--max-patches", plan.max_patches, "Maximum patches (dynres)")->capture_default_str();
  p->add_option("--max-tokens", plan.max_tokens, "Token budget (dynres: defaults to --max-patches, else 3600)");
  p->add_option("--tile", plan.tile, "Tile size (384, or 1536 for multicrop-s2)");
  p->add_option("--tokens-per-tile", plan.tokens_per_tile, "Visual tokens per tile")->capture_default_str();
  p->add_option("--scales", plan.scales, "S2 scale factors")->capture_default_str();
  p->add_flag("--json", plan.json, "Print the plan as JSON");
  p->add_option("--with-layout", plan.layout_text, "Also assemble a sequence of the image plus N text tokens");
  p->add_option("--max-seq-len", plan.max_seq_len, "Sequence limit for --with-layout")->capture_default_str();

  LintArgs lint;
  auto* l = app.add_subcommand("lint", "Lint JSONL records and summarize the dataset");
  l->add_option("--input,-i", lint.input, "Records (JSONL, - for stdin)")->capture_default_str();
  l->add_option("--report", lint.report, "Where to write the dataset report (JSON)")->capture_default_str();
  l->add_option("--known-tag", lint.known_tags, "Accepted image tag (repeatable; default <image>, <image_N>)");
  l->add_option("--max-tag-distance", lint.max_tag_distance, "Edit distance for misspelled tags")->capture_default_str();
  l->add_option("--jobs,-j", lint.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  TransformArgs tr;
  auto* t = app.add_subcommand("transform", "Repair, reformat or regenerate records");
  t->add_option("--input,-i", tr.input, "Records (JSONL, - for stdin)")->capture_default_str();
  t->add_option("--output,-o", tr.output, "Output records (JSONL, - for stdout)")->capture_default_str();
  t->add_flag("--repair", tr.repair, "Apply fixers for fixable lint issues");
  t->add_flag("--double-duty", tr.double_duty, "Emit a format-instruction variant after each record");
  t->add_flag("--regenerate", tr.regenerate, "Re-answer records with a judge and majority vote (MMTK_JUDGE_URL)");
  t->add_option("--seed", tr.seed, "Seed for --double-duty");
  t->add_option("--format", tr.formats, "Restrict double-duty formats (single_word, json, lowercase, number_only, sentence)");
  t->add_option("--votes", tr.votes, "Judge answers per record")->capture_default_str();
  t->add_option("--threshold", tr.threshold, "Vote share to beat, in [0.5, 1]")->capture_default_str();
  t->add_option("--attempts", tr.attempts, "Tries per judge call")->capture_default_str();
  t->add_option("--description-prompt", tr.description_prompt, "Ask the judge with this prompt instead of the question");
  t->add_option("--mock-judge", tr.mock_judge, "Scripted judge answers instead of an endpoint")->delimiter(',');
  t->add_option("--jobs,-j", tr.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  SynthArgs sy;
  auto* s = app.add_subcommand("synth", "Generate synthetic multi-image records");
  s->require_subcommand(1);
  auto add_synth_common = [&](CLI::App* sub, bool seeded) {
    sub->add_option("--input,-i", sy.input, "Input JSONL")->capture_default_str();
    sub->add_option("--output,-o", sy.output, "Output records (JSONL)")->capture_default_str();
    auto* seed = sub->add_option("--seed", sy.seed, "Random seed");
    if (seeded) seed->required();
  };
  auto* scr = s->add_subcommand("scrambled", "Caption images requested in a random order");
  add_synth_common(scr, true);
  scr->add_option("--group-size", sy.group_size, "Images per record")->capture_default_str();
  scr->add_option("--insert-prob", sy.insert_prob, "Chance of a sprinkled extra image")->capture_default_str();
  auto* mat = s->add_subcommand("match", "Match shuffled captions to images");
  add_synth_common(mat, true);
  mat->add_option("--group-size", sy.group_size, "Images per record")->capture_default_str();
  auto* chg = s->add_subcommand("whats-changed", "Describe changes between consecutive frames");
  add_synth_common(chg, false);
  chg->add_option("--threshold", sy.diff_threshold, "Per-pixel change threshold as a fraction of 255")
      ->capture_default_str();
  chg->add_flag("--describer", sy.describer, "Ask a judge endpoint (MMTK_JUDGE_URL) to describe changes");
  chg->add_flag("--no-fallback", sy.no_fallback, "Fail instead of using the pixel diff when the describer fails");

  MixArgs mix;
  auto* m = app.add_subcommand("mix", "Plan a training mixture from a mixture file");
  m->add_option("--mixture", mix.config, "Mixture file ([category.NAME] sections)")->required();
  m->add_option("--output,-o", mix.output, "Manifest JSON")->capture_default_str();
  m->add_option("--seed", mix.seed, "Seed for --draw");
  m->add_option("--draw", mix.draw, "Write records drawn from category sources to this JSONL");
  m->add_option("--share-basis", mix.share_basis, "Reasoning share basis")
      ->check(CLI::IsMember({"samples", "tokens"}))
      ->capture_default_str();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Run benchmark samples against a model (MMTK_MODEL_URL or --mock)");
  e->add_option("--input,-i", ev.input, "Benchmark records (JSONL with meta.benchmark, meta.task_kind)")->required();
  e->add_option("--output,-o", ev.output, "Results JSONL")->capture_default_str();
  e->add_option("--seed", ev.seed, "Subset seed")->required();
  e->add_option("--subset", ev.subset, "Samples drawn per benchmark")->capture_default_str();
  e->add_option("--model", ev.model, "Model label")->capture_default_str();
  e->add_option("--max-output-tokens", ev.max_output_tokens, "Generation limit")->capture_default_str();
  e->add_option("--temperature", ev.temperature, "Sampling temperature")->capture_default_str();
  e->add_flag("--fail-fast", ev.fail_fast, "Stop at the first transport error");
  e->add_flag("--mock", ev.mock, "Use a local mock model");
  e->add_option("--mock-delay-ms", ev.mock_delay_ms, "Mock response delay")->capture_default_str();
  e->add_option("--mock-tokens", ev.mock_tokens, "Output tokens the mock reports");
  e->add_option("--mock-accuracy", ev.mock_accuracy, "Share of correct mock answers")->capture_default_str();
  e->add_option("--mock-think-words", ev.mock_think_words, "Length of the mock's think block")->capture_default_str();

  ParetoArgs pa;
  auto* r = app.add_subcommand("pareto", "Aggregate eval results and plot the accuracy/cost frontier");
  r->add_option("--results", pa.results, "NAME=results.jsonl (repeatable)")->required();
  r->add_option("--cost", pa.cost, "Cost axis")->check(CLI::IsMember({"latency", "tokens"}))->capture_default_str();
  r->add_option("--csv", pa.csv, "CSV output path")->required();
  r->add_option("--svg", pa.svg, "SVG output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (p->parsed()) return run_plan(plan);
    if (l->parsed()) return run_lint(lint);
    if (t->parsed()) return run_transform(tr);
    if (scr->parsed()) return run_synth_groups(sy, true);
    if (mat->parsed()) return run_synth_groups(sy, false);
    if (chg->parsed()) return run_synth_changed(sy);
    if (m->parsed()) return run_mix(mix);
    if (e->parsed()) return run_eval(ev);
    if (r->parsed()) return run_pareto(pa);
  } catch (const ConfigError& err) {
    std::cerr << "configuration error: " << err.what() << "\n";
    return 2;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 2;
}
