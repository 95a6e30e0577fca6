#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace mmtk {

enum class Strategy { DynamicRes, DynamicS2, MultiCrop, MultiCropS2 };

std::string_view to_string(Strategy s);
// Accepts "dynres", "dynamic-s2", "multicrop", "multicrop-s2" (and the enum spellings).
std::optional<Strategy> parse_strategy(std::string_view name);

struct Size {
  std::int64_t w = 0;
  std::int64_t h = 0;
  friend bool operator==(const Size&, const Size&) = default;
};

struct Offset {
  std::int64_t x = 0;
  std::int64_t y = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

struct StrategyConfig {
  Strategy strategy = Strategy::DynamicRes;
  std::int64_t patch_px = 16;
  std::int64_t tile_px = 384;
  std::int64_t tokens_per_tile = 576;
  std::int64_t max_tokens = 3600;
  std::int64_t min_patches = 256;
  std::int64_t max_patches = 3600;
  std::vector<int> s2_scales{1, 2};
  std::uint8_t pad_value = 128;

  // Throws ConfigError when an invariant is broken.
  void validate() const;

  static StrategyConfig dynamic_resolution(std::int64_t min_patches, std::int64_t max_patches,
                                           std::int64_t patch_px = 16);
  static StrategyConfig dynamic_s2(std::int64_t max_tokens, std::int64_t tokens_per_tile = 576);
  static StrategyConfig multicrop(std::int64_t max_tokens, std::int64_t tokens_per_tile = 576);
  static StrategyConfig multicrop_s2(std::int64_t max_tokens, std::int64_t tokens_per_tile = 576);
};

// A square tile cut from the working image (the resized or downscaled source).
// pad is the letterbox fill on the right/bottom when the image is smaller
// than the tile along that axis.
struct CropSpec {
  Offset offset;
  Size size;
  Size pad;  // (right, bottom)

  Size content() const { return {size.w - pad.w, size.h - pad.h}; }
  friend bool operator==(const CropSpec&, const CropSpec&) = default;
};

struct PatchPlan {
  StrategyConfig config;
  Size source_size;
  Size resized_size;  // working image size; crops live in this space
  Size grid;          // patches for DynamicRes, tiles or crops otherwise
  std::vector<CropSpec> crops;
  std::vector<int> scales;
  std::int64_t token_count = 0;
};

PatchPlan plan_dynamic_resolution(std::int64_t width, std::int64_t height, const StrategyConfig& cfg);
PatchPlan plan_dynamic_s2(std::int64_t width, std::int64_t height, const StrategyConfig& cfg);
PatchPlan plan_multicrop(std::int64_t width, std::int64_t height, const StrategyConfig& cfg);

// Dispatches on cfg.strategy.
PatchPlan plan_image(std::int64_t width, std::int64_t height, const StrategyConfig& cfg);

nlohmann::ordered_json to_json(const PatchPlan& plan);
PatchPlan plan_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Coordinates

struct PixelPoint {
  double x = 0;
  double y = 0;
};

struct PixelRect {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;
};

struct NormPoint {
  double x = 0;
  double y = 0;
  bool in_range() const;
};

struct NormRect {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;
  bool in_range() const;
  bool contains(const NormPoint& p) const;  // boundary inclusive
};

struct GlobalNormalized {};
struct CropLocal {
  std::size_t crop_index = 0;
};
using CoordTarget = std::variant<GlobalNormalized, CropLocal>;

NormPoint map_coords(const PatchPlan& plan, const PixelPoint& p, const CoordTarget& target);
NormRect map_coords(const PatchPlan& plan, const PixelRect& r, const CoordTarget& target);

PixelPoint denormalize(const PatchPlan& plan, const NormPoint& p, const CoordTarget& target);
PixelRect denormalize(const PatchPlan& plan, const NormRect& r, const CoordTarget& target);

}  // namespace mmtk
