#include "mmtk/fusion.hpp"

#include <algorithm>

#include "mmtk/error.hpp"

namespace mmtk {

FusedLayout assemble_sequence(const TokenStream& stream, std::span<const PatchPlan> plans,
                              std::int64_t marker_overhead) {
  if (marker_overhead < 0) throw ConfigError("marker_overhead must be non-negative");
  const std::int64_t before = marker_overhead - marker_overhead / 2;

  std::vector<bool> used(plans.size(), false);
  FusedLayout layout;
  layout.marker_overhead = marker_overhead;
  std::int64_t pos = 0;
  for (const StreamItem& item : stream) {
    if (std::holds_alternative<TextToken>(item)) {
      ++pos;
      continue;
    }
    const std::size_t idx = std::get<ImagePlaceholder>(item).image_index;
    if (idx >= plans.size()) {
      throw ReferenceError("image placeholder " + std::to_string(idx) + " has no matching plan");
    }
    if (used[idx]) throw InputError("duplicate image placeholder " + std::to_string(idx));
    used[idx] = true;
    const std::int64_t n = plans[idx].token_count;
    layout.visual_spans.push_back({pos + before, n, idx});
    pos += marker_overhead + n;
  }
  for (std::size_t i = 0; i < used.size(); ++i) {
    if (!used[i]) throw ReferenceError("plan " + std::to_string(i) + " is not referenced by any placeholder");
  }
  layout.total_len = pos;
  return layout;
}

std::string_view to_string(LayoutRule r) {
  switch (r) {
    case LayoutRule::Length: return "length";
    case LayoutRule::Bounds: return "bounds";
    case LayoutRule::Order: return "order";
    case LayoutRule::Overlap: return "overlap";
  }
  return "unknown";
}

std::vector<LayoutViolation> validate_layout(const FusedLayout& layout, std::int64_t max_seq_len) {
  std::vector<LayoutViolation> out;
  if (layout.total_len > max_seq_len) {
    out.push_back({LayoutRule::Length, "total_len " + std::to_string(layout.total_len) +
                                           " exceeds max_seq_len " + std::to_string(max_seq_len)});
  }

  const auto& spans = layout.visual_spans;
  for (const VisualSpan& s : spans) {
    if (s.start < 0 || s.length < 0 || s.start + s.length > layout.total_len) {
      out.push_back({LayoutRule::Bounds, "span for image " + std::to_string(s.image_index) +
                                             " is outside [0, total_len)"});
      break;
    }
  }
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].start < spans[i - 1].start) {
      out.push_back({LayoutRule::Order, "spans are not in ascending start order"});
      break;
    }
  }

  // Overlap is checked independently of order.
  std::vector<VisualSpan> sorted(spans.begin(), spans.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const VisualSpan& a, const VisualSpan& b) { return a.start < b.start; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].start < sorted[i - 1].start + sorted[i - 1].length) {
      out.push_back({LayoutRule::Overlap, "spans for images " + std::to_string(sorted[i - 1].image_index) +
                                              " and " + std::to_string(sorted[i].image_index) + " overlap"});
      break;
    }
  }
  return out;
}

nlohmann::ordered_json to_json(const FusedLayout& layout) {
  nlohmann::ordered_json j;
  j["total_len"] = layout.total_len;
  j["marker_overhead"] = layout.marker_overhead;
  auto spans = nlohmann::ordered_json::array();
  for (const VisualSpan& s : layout.visual_spans) {
    nlohmann::ordered_json sj;
    sj["start"] = s.start;
    sj["length"] = s.length;
    sj["image_index"] = s.image_index;
    spans.push_back(sj);
  }
  j["visual_spans"] = spans;
  return j;
}

}  // namespace mmtk
