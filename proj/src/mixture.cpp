#include "mmtk/mixture.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "mmtk/error.hpp"
#include "mmtk/text.hpp"

namespace mmtk {

MixtureManifest plan_mixture(const std::vector<CategorySpec>& specs) {
  MixtureManifest m;
  m.specs = specs;
  for (const auto& s : specs) {
    if (s.base_count < 0) throw InputError("category " + s.name + ": negative base_count");
    if (s.duplication < 1) throw InputError("category " + s.name + ": duplication must be >= 1");
    m.total_samples += s.samples();
    if (s.reasoning) m.reasoning_samples += s.samples();
  }
  m.reasoning_share = m.total_samples > 0
                          ? static_cast<double>(m.reasoning_samples) / static_cast<double>(m.total_samples)
                          : 0.0;
  return m;
}

double estimate_tokens(const MixtureManifest& manifest, std::optional<double> default_avg_tokens) {
  double total = 0.0;
  for (const auto& s : manifest.specs) {
    const std::optional<double> avg = s.avg_tokens ? s.avg_tokens : default_avg_tokens;
    if (!avg) throw ConfigError("category " + s.name + " has no avg_tokens and no default was given");
    total += static_cast<double>(s.samples()) * *avg;
  }
  return total;
}

ShareReport check_reasoning_share(const MixtureManifest& manifest, double target, double tol, ShareBasis basis,
                                  std::optional<double> default_avg_tokens) {
  if (manifest.total_samples <= 0) throw InputError("reasoning share of an empty manifest is undefined");
  ShareReport r;
  if (basis == ShareBasis::Samples) {
    r.share = static_cast<double>(manifest.reasoning_samples) / static_cast<double>(manifest.total_samples);
  } else {
    const double all = estimate_tokens(manifest, default_avg_tokens);
    MixtureManifest reasoning_only;
    for (const auto& s : manifest.specs) {
      if (s.reasoning) reasoning_only.specs.push_back(s);
    }
    r.share = all > 0 ? estimate_tokens(reasoning_only, default_avg_tokens) / all : 0.0;
  }
  // Slack absorbs binary representation error at the boundary (0.25 - 0.20).
  r.within = std::fabs(r.share - target) <= tol + 1e-12;
  return r;
}

nlohmann::ordered_json to_json(const MixtureManifest& m) {
  nlohmann::ordered_json j;
  auto cats = nlohmann::ordered_json::array();
  for (const auto& s : m.specs) {
    nlohmann::ordered_json c;
    c["name"] = s.name;
    c["base_count"] = s.base_count;
    c["duplication"] = s.duplication;
    c["samples"] = s.samples();
    c["reasoning"] = s.reasoning;
    if (s.avg_tokens) c["avg_tokens"] = *s.avg_tokens;
    if (s.source) c["source"] = *s.source;
    cats.push_back(c);
  }
  j["categories"] = cats;
  j["total_samples"] = m.total_samples;
  j["reasoning_samples"] = m.reasoning_samples;
  j["reasoning_share"] = m.reasoning_share;
  if (m.total_tokens) j["total_tokens"] = *m.total_tokens;
  return j;
}

MixtureManifest manifest_from_json(const nlohmann::json& j) {
  try {
    std::vector<CategorySpec> specs;
    for (const auto& c : j.at("categories")) {
      CategorySpec s;
      s.name = c.at("name").get<std::string>();
      s.base_count = c.at("base_count").get<std::int64_t>();
      s.duplication = c.at("duplication").get<std::int64_t>();
      s.reasoning = c.at("reasoning").get<bool>();
      if (c.contains("avg_tokens")) s.avg_tokens = c["avg_tokens"].get<double>();
      if (c.contains("source")) s.source = c["source"].get<std::string>();
      specs.push_back(std::move(s));
    }
    MixtureManifest m = plan_mixture(specs);
    if (m.total_samples != j.at("total_samples").get<std::int64_t>()) {
      throw InputError("manifest total_samples disagrees with its categories");
    }
    if (j.contains("total_tokens")) m.total_tokens = j["total_tokens"].get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed manifest: ") + e.what());
  }
}

namespace {

std::int64_t parse_count(const std::string& raw, int line) {
  std::string s;
  for (char c : raw) {
    if (c != '_') s += c;
  }
  double mult = 1.0;
  if (!s.empty()) {
    switch (s.back()) {
      case 'K': case 'k': mult = 1e3; s.pop_back(); break;
      case 'M': case 'm': mult = 1e6; s.pop_back(); break;
      case 'B': case 'b': mult = 1e9; s.pop_back(); break;
      default: break;
    }
  }
  const auto v = text::parse_number(s);
  if (!v) throw ConfigError("line " + std::to_string(line) + ": expected a count, got \"" + raw + "\"");
  const double scaled = std::round(*v * mult);
  if (std::fabs(scaled - *v * mult) > 1e-6) {
    throw ConfigError("line " + std::to_string(line) + ": count must be an integer");
  }
  return static_cast<std::int64_t>(scaled);
}

double parse_real(const std::string& raw, int line) {
  const auto v = text::parse_number(raw);
  if (!v) throw ConfigError("line " + std::to_string(line) + ": expected a number, got \"" + raw + "\"");
  return *v;
}

bool parse_bool(const std::string& raw, int line) {
  if (raw == "true") return true;
  if (raw == "false") return false;
  throw ConfigError("line " + std::to_string(line) + ": expected true or false, got \"" + raw + "\"");
}

std::string parse_string(const std::string& raw, int line) {
  if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') return raw.substr(1, raw.size() - 2);
  throw ConfigError("line " + std::to_string(line) + ": expected a quoted string");
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

}  // namespace

MixtureConfig parse_mixture_config(std::istream& in) {
  MixtureConfig cfg;
  std::optional<std::size_t> current;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line(text::trim(strip_comment(raw)));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": unterminated section");
      const std::string section(text::trim(std::string_view(line).substr(1, line.size() - 2)));
      const std::string prefix = "category.";
      if (section.rfind(prefix, 0) != 0 || section.size() == prefix.size()) {
        throw ConfigError("line " + std::to_string(line_no) + ": unknown section [" + section + "]");
      }
      CategorySpec spec;
      spec.name = section.substr(prefix.size());
      for (const auto& c : cfg.categories) {
        if (c.name == spec.name) throw ConfigError("duplicate category " + spec.name);
      }
      cfg.categories.push_back(spec);
      current = cfg.categories.size() - 1;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(text::trim(std::string_view(line).substr(0, eq)));
    const std::string value(text::trim(std::string_view(line).substr(eq + 1)));
    if (!current) {
      if (key == "default_avg_tokens") {
        cfg.default_avg_tokens = parse_real(value, line_no);
      } else if (key == "target_reasoning_share") {
        cfg.target_reasoning_share = parse_real(value, line_no);
      } else if (key == "reasoning_tolerance") {
        cfg.reasoning_tolerance = parse_real(value, line_no);
      } else {
        throw ConfigError("line " + std::to_string(line_no) + ": unknown key \"" + key + "\"");
      }
      continue;
    }
    CategorySpec& spec = cfg.categories[*current];
    if (key == "count") {
      spec.base_count = parse_count(value, line_no);
    } else if (key == "duplication") {
      spec.duplication = parse_count(value, line_no);
    } else if (key == "reasoning") {
      spec.reasoning = parse_bool(value, line_no);
    } else if (key == "avg_tokens") {
      spec.avg_tokens = parse_real(value, line_no);
    } else if (key == "source") {
      spec.source = parse_string(value, line_no);
    } else {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key \"" + key + "\" in [category." +
                        spec.name + "]");
    }
  }
  return cfg;
}

MixtureConfig load_mixture_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mixture config " + path);
  return parse_mixture_config(in);
}

}  // namespace mmtk
