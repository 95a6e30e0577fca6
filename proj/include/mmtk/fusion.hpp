#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mmtk/vision.hpp"

namespace mmtk {

struct TextToken {
  std::int64_t id = 0;
};

struct ImagePlaceholder {
  std::size_t image_index = 0;
};

using StreamItem = std::variant<TextToken, ImagePlaceholder>;
using TokenStream = std::vector<StreamItem>;

struct VisualSpan {
  std::int64_t start = 0;
  std::int64_t length = 0;
  std::size_t image_index = 0;
  friend bool operator==(const VisualSpan&, const VisualSpan&) = default;
};

// Bookkeeping for a mid-fusion sequence: where each image's soft tokens sit
// among the text tokens. Nothing is materialized.
struct FusedLayout {
  std::int64_t total_len = 0;
  std::vector<VisualSpan> visual_spans;
  std::int64_t marker_overhead = 2;
};

// Each placeholder expands in place to begin markers, the plan's visual
// tokens, then end markers. An overhead of m tokens puts ceil(m/2) before the
// span and floor(m/2) after it.
FusedLayout assemble_sequence(const TokenStream& stream, std::span<const PatchPlan> plans,
                              std::int64_t marker_overhead = 2);

enum class LayoutRule { Length, Bounds, Order, Overlap };

struct LayoutViolation {
  LayoutRule rule;
  std::string message;
};

std::string_view to_string(LayoutRule r);

// One violation per breached rule; empty when the layout fits.
std::vector<LayoutViolation> validate_layout(const FusedLayout& layout, std::int64_t max_seq_len);

nlohmann::ordered_json to_json(const FusedLayout& layout);

}  // namespace mmtk
