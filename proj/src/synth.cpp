#include "mmtk/synth.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "mmtk/error.hpp"
#include "mmtk/rng.hpp"
#include "mmtk/text.hpp"

namespace mmtk {

namespace {

std::string image_tags(std::size_t first, std::size_t last) {
  std::string out;
  for (std::size_t i = first; i <= last; ++i) out += "<image_" + std::to_string(i) + ">\n";
  return out;
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string join_refs(std::string_view task, const std::vector<std::string>& refs) {
  std::string key(task);
  for (const auto& r : refs) {
    key += '|';
    key += r;
  }
  return key;
}

void check_items(const std::vector<CaptionedImage>& items) {
  if (items.size() < 2) throw InputError("multi-image synthesis needs at least 2 captioned images");
  for (const auto& it : items) {
    if (text::trim(it.caption).empty()) throw InputError("empty caption for image " + it.image);
  }
}

}  // namespace

void SynthConfig::validate() const {
  if (group_size < 2) throw ConfigError("group_size must be at least 2");
  if (!(insert_prob >= 0.0 && insert_prob <= 1.0)) throw ConfigError("insert_prob must lie in [0, 1]");
  if (!(diff_threshold >= 0.0 && diff_threshold < 1.0)) throw ConfigError("diff_threshold must lie in [0, 1)");
}

SampleRecord synth_scrambled(const std::vector<CaptionedImage>& items, const SynthConfig& cfg) {
  cfg.validate();
  check_items(items);
  const std::size_t n = std::min(items.size(), cfg.group_size);

  SampleRecord rec;
  for (std::size_t i = 0; i < n; ++i) rec.images.push_back(items[i].image);
  const std::string key = join_refs("scrambled", rec.images);
  Rng rng(derive_seed(cfg.seed, key));
  const auto perm = random_permutation(rng, n);
  const bool insert = uniform_unit(rng) < cfg.insert_prob && items.size() > n;

  std::vector<std::size_t> order;
  std::string request = "Caption these images in the following order: ";
  std::string answer;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t idx = perm[j] + 1;
    order.push_back(idx);
    request += (j ? ", Image " : "Image ") + std::to_string(idx);
    answer += (j ? "\nImage " : "Image ") + std::to_string(idx) + ": " + std::string(text::trim(items[perm[j]].caption));
  }
  request += ".";
  rec.turns.push_back({Role::User, image_tags(1, n) + request});

  nlohmann::json meta{{"task", "scrambled"}, {"request_order", order}, {"extra_image", nullptr}};
  if (insert) {
    const std::size_t extra = n + 1;
    rec.images.push_back(items[n].image);
    rec.turns.push_back({Role::Assistant, answer});
    rec.turns.push_back({Role::User, image_tags(extra, extra) + "Now caption Image " + std::to_string(extra) + " as well."});
    answer = "Image " + std::to_string(extra) + ": " + std::string(text::trim(items[n].caption));
    meta["extra_image"] = extra;
  }
  rec.final = answer;
  rec.mode = Mode::Direct;
  rec.id = "synth-scrambled-" + hex16(derive_seed(cfg.seed, join_refs("scrambled", rec.images)));
  rec.meta = meta;
  add_provenance(rec, rec.images.front(), "synth_scrambled", cfg.seed);
  return rec;
}

SampleRecord synth_caption_match(const std::vector<CaptionedImage>& items, const SynthConfig& cfg) {
  cfg.validate();
  check_items(items);
  const std::size_t n = std::min(items.size(), cfg.group_size);

  std::set<std::string> seen;
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen.insert(text::casefold(text::trim(items[i].caption))).second) {
      throw InputError("duplicate caption \"" + std::string(text::trim(items[i].caption)) +
                       "\" makes caption matching ambiguous");
    }
  }

  SampleRecord rec;
  for (std::size_t i = 0; i < n; ++i) rec.images.push_back(items[i].image);
  const std::string key = join_refs("match", rec.images);
  Rng rng(derive_seed(cfg.seed, key));
  const auto perm = random_permutation(rng, n);

  std::vector<std::size_t> gold;
  std::string request = "Match each caption to the image it describes.\n";
  std::string answer;
  for (std::size_t j = 0; j < n; ++j) {
    gold.push_back(perm[j] + 1);
    request += std::to_string(j + 1) + ". " + std::string(text::trim(items[perm[j]].caption)) + "\n";
    answer += (j ? "\nCaption " : "Caption ") + std::to_string(j + 1) + ": Image " + std::to_string(perm[j] + 1);
  }
  rec.turns.push_back({Role::User, image_tags(1, n) + std::string(text::rtrim(request))});
  rec.final = answer;
  rec.mode = Mode::Direct;
  rec.id = "synth-match-" + hex16(derive_seed(cfg.seed, key));
  rec.meta = {{"task", "caption_match"}, {"caption_to_image", gold}};
  add_provenance(rec, rec.images.front(), "synth_caption_match", cfg.seed);
  return rec;
}

std::optional<NormRect> diff_region(const Image& a, const Image& b, const SynthConfig& cfg) {
  if (a.width != b.width || a.height != b.height) {
    throw InputError("diff_region: image sizes differ (" + std::to_string(a.width) + "x" + std::to_string(a.height) +
                     " vs " + std::to_string(b.width) + "x" + std::to_string(b.height) + ")");
  }
  if (a.channels != b.channels) throw InputError("diff_region: channel counts differ");
  if (a.width == 0 || a.height == 0) return std::nullopt;

  // Threshold in byte units, rounded to kill representation noise (16/255*255).
  const double limit = std::round(cfg.diff_threshold * 255.0 * 1e6) / 1e6;
  int x0 = a.width, y0 = a.height, x1 = -1, y1 = -1;
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      int delta = 0;
      for (int c = 0; c < a.channels; ++c) delta = std::max(delta, std::abs(int(a.at(x, y, c)) - int(b.at(x, y, c))));
      if (delta > limit) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
    }
  }
  if (x1 < 0) return std::nullopt;
  const double w = a.width;
  const double h = a.height;
  return NormRect{x0 / w, y0 / h, (x1 - x0 + 1) / w, (y1 - y0 + 1) / h};
}

std::string describe_change(const std::optional<NormRect>& rect) {
  if (!rect) return "No visible change.";
  return "The region at (x=" + text::format_fixed(rect->x, 4) + ", y=" + text::format_fixed(rect->y, 4) +
         ", w=" + text::format_fixed(rect->w, 4) + ", h=" + text::format_fixed(rect->h, 4) +
         ") changed (normalized coordinates).";
}

SampleRecord synth_whats_changed(const FrameSequence& seq, const std::vector<Image>& frames, JudgeClient* describer,
                                 const SynthConfig& cfg) {
  cfg.validate();
  if (seq.frames.size() != 2 && seq.frames.size() != 3) {
    throw InputError("a frame sequence holds 2 or 3 frames, got " + std::to_string(seq.frames.size()));
  }
  if (!seq.timestamps.empty() && seq.timestamps.size() != seq.frames.size()) {
    throw InputError("timestamps must match frames one to one");
  }
  if (frames.size() != seq.frames.size()) throw InputError("decoded frame count does not match the sequence");

  SampleRecord rec;
  rec.images = seq.frames;
  rec.mode = Mode::Direct;
  std::vector<Annotation> anns;
  std::string answer;
  for (std::size_t i = 0; i + 1 < seq.frames.size(); ++i) {
    const std::string a = std::to_string(i + 1);
    const std::string b = std::to_string(i + 2);
    if (!answer.empty()) rec.turns.push_back({Role::Assistant, answer});
    const std::string question = "What changed between frame " + a + " and frame " + b + "?";
    rec.turns.push_back({Role::User, "<image_" + a + ">\n<image_" + b + ">\n" + question});

    const auto rect = diff_region(frames[i], frames[i + 1], cfg);
    if (rect) anns.push_back({AnnotationKind::Rect, {rect->x, rect->y, rect->w, rect->h}, "changed_" + a + "_" + b});
    answer.clear();
    if (describer) {
      const std::vector<std::string> pair{seq.frames[i], seq.frames[i + 1]};
      try {
        answer = describer->generate(question, pair);
      } catch (const TransportError&) {
        if (!cfg.allow_fallback) throw;
      }
    }
    if (text::trim(answer).empty()) answer = describe_change(rect);
  }
  rec.final = answer;
  if (!anns.empty()) rec.annotations = anns;
  rec.id = "synth-changed-" + hex16(derive_seed(cfg.seed, join_refs("changed", seq.frames)));
  rec.meta = {{"task", "whats_changed"}};
  if (!seq.timestamps.empty()) rec.meta["timestamps"] = seq.timestamps;
  add_provenance(rec, seq.frames.front(), "synth_whats_changed", cfg.seed,
                 {{"describer", describer ? "external" : "pixel_diff"}});
  return rec;
}

SampleRecord synth_whats_changed(const FrameSequence& seq, JudgeClient* describer, const SynthConfig& cfg) {
  std::vector<Image> frames;
  for (const auto& f : seq.frames) frames.push_back(load_image(f));
  return synth_whats_changed(seq, frames, describer, cfg);
}

}  // namespace mmtk
