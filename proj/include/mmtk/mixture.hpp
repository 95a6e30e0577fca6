#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace mmtk {

struct CategorySpec {
  std::string name;
  std::int64_t base_count = 0;
  std::int64_t duplication = 1;
  bool reasoning = false;
  std::optional<double> avg_tokens;
  std::optional<std::string> source;  // JSONL to draw records from (CLI only)

  std::int64_t samples() const { return base_count * duplication; }
  friend bool operator==(const CategorySpec&, const CategorySpec&) = default;
};

struct MixtureManifest {
  std::vector<CategorySpec> specs;
  std::int64_t total_samples = 0;
  std::int64_t reasoning_samples = 0;
  double reasoning_share = 0.0;
  std::optional<double> total_tokens;

  friend bool operator==(const MixtureManifest&, const MixtureManifest&) = default;
};

// Throws InputError on negative counts or duplication < 1.
MixtureManifest plan_mixture(const std::vector<CategorySpec>& specs);

// Sum of samples x avg_tokens, categories without avg_tokens use the default.
// Throws ConfigError when a category has neither.
double estimate_tokens(const MixtureManifest& manifest, std::optional<double> default_avg_tokens = std::nullopt);

enum class ShareBasis { Samples, Tokens };

struct ShareReport {
  double share = 0.0;
  bool within = false;
};

ShareReport check_reasoning_share(const MixtureManifest& manifest, double target, double tol,
                                  ShareBasis basis = ShareBasis::Samples,
                                  std::optional<double> default_avg_tokens = std::nullopt);

nlohmann::ordered_json to_json(const MixtureManifest& manifest);
MixtureManifest manifest_from_json(const nlohmann::json& j);

// Plain-text mixture configuration:
//
//   # comment
//   default_avg_tokens = 3001.6
//   target_reasoning_share = 0.2
//   reasoning_tolerance = 0.05
//
//   [category.math]
//   count = 150_000
//   duplication = 3
//   reasoning = true
//   avg_tokens = 900
//   source = "math.jsonl"
//
// Counts accept underscores and K/M/B suffixes ("150K", "1M"). Unknown keys
// are rejected.
struct MixtureConfig {
  std::vector<CategorySpec> categories;
  std::optional<double> default_avg_tokens;
  double target_reasoning_share = 0.20;
  double reasoning_tolerance = 0.05;
};

MixtureConfig parse_mixture_config(std::istream& in);
MixtureConfig load_mixture_config(const std::string& path);

}  // namespace mmtk
