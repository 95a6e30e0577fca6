#include "mmtk/vision.hpp"

#include <algorithm>
#include <cmath>

#include "mmtk/error.hpp"

namespace mmtk {

namespace {

using i128 = __int128;

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

void require_image(std::int64_t width, std::int64_t height) {
  if (width < 1 || height < 1) {
    throw InputError("image dimensions must be positive, got " + std::to_string(width) + "x" +
                     std::to_string(height));
  }
}

// Aspect distortion of a (cols, rows) grid against a width x height image,
// kept as the exact ratio max(a,b)/min(a,b) with a = cols*H and b = rows*W.
// Ordering these ratios is the same as ordering |ln((cols/rows)*(H/W))|.
struct Distortion {
  i128 num;
  i128 den;

  static Distortion of(std::int64_t cols, std::int64_t rows, std::int64_t width, std::int64_t height) {
    const i128 a = static_cast<i128>(cols) * height;
    const i128 b = static_cast<i128>(rows) * width;
    return a >= b ? Distortion{a, b} : Distortion{b, a};
  }

  // -1, 0, +1
  int compare(const Distortion& o) const {
    const i128 l = num * o.den;
    const i128 r = o.num * den;
    return l < r ? -1 : (l > r ? 1 : 0);
  }
};

struct GridChoice {
  std::int64_t cols = 0;
  std::int64_t rows = 0;
  Distortion distortion{1, 1};
  std::int64_t area_gap = 0;  // only used by the patch planner
};

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::DynamicRes: return "dynres";
    case Strategy::DynamicS2: return "dynamic-s2";
    case Strategy::MultiCrop: return "multicrop";
    case Strategy::MultiCropS2: return "multicrop-s2";
  }
  return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  if (name == "dynres" || name == "DynamicRes" || name == "dynamic-resolution") return Strategy::DynamicRes;
  if (name == "dynamic-s2" || name == "DynamicS2" || name == "dyns2") return Strategy::DynamicS2;
  if (name == "multicrop" || name == "MultiCrop") return Strategy::MultiCrop;
  if (name == "multicrop-s2" || name == "MultiCropS2") return Strategy::MultiCropS2;
  return std::nullopt;
}

void StrategyConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("invalid strategy config: " + msg); };
  if (patch_px < 1) fail("patch_px must be positive");
  if (max_tokens < 1) fail("max_tokens must be positive");
  if (s2_scales.empty()) fail("s2_scales must not be empty");
  for (int s : s2_scales) {
    if (s < 1) fail("s2_scales entries must be positive");
  }
  if (strategy == Strategy::DynamicRes) {
    if (min_patches < 1 || max_patches < 1) fail("min_patches and max_patches must be positive");
    if (min_patches > max_patches) {
      fail("min_patches (" + std::to_string(min_patches) + ") > max_patches (" + std::to_string(max_patches) + ")");
    }
    if (max_patches > max_tokens) fail("max_patches exceeds max_tokens");
    return;
  }
  if (tile_px < 1) fail("tile_px must be positive");
  if (tile_px % patch_px != 0) fail("tile_px must be a multiple of patch_px");
  if (tokens_per_tile < 1) fail("tokens_per_tile must be positive");
  if (max_tokens < tokens_per_tile) {
    fail("max_tokens (" + std::to_string(max_tokens) + ") < tokens_per_tile (" + std::to_string(tokens_per_tile) + ")");
  }
}

StrategyConfig StrategyConfig::dynamic_resolution(std::int64_t min_p, std::int64_t max_p, std::int64_t patch) {
  StrategyConfig c;
  c.strategy = Strategy::DynamicRes;
  c.patch_px = patch;
  c.min_patches = min_p;
  c.max_patches = max_p;
  c.max_tokens = max_p;
  return c;
}

StrategyConfig StrategyConfig::dynamic_s2(std::int64_t budget, std::int64_t per_tile) {
  StrategyConfig c;
  c.strategy = Strategy::DynamicS2;
  c.tile_px = 384;
  c.tokens_per_tile = per_tile;
  c.max_tokens = budget;
  return c;
}

StrategyConfig StrategyConfig::multicrop(std::int64_t budget, std::int64_t per_tile) {
  StrategyConfig c;
  c.strategy = Strategy::MultiCrop;
  c.tile_px = 384;
  c.tokens_per_tile = per_tile;
  c.max_tokens = budget;
  return c;
}

StrategyConfig StrategyConfig::multicrop_s2(std::int64_t budget, std::int64_t per_tile) {
  StrategyConfig c;
  c.strategy = Strategy::MultiCropS2;
  c.tile_px = 1536;
  c.tokens_per_tile = per_tile;
  c.max_tokens = budget;
  return c;
}

// For each column count only the two row counts bracketing the ideal
// cols*H/W can win: distortion grows monotonically away from the ideal.
PatchPlan plan_dynamic_resolution(std::int64_t width, std::int64_t height, const StrategyConfig& cfg) {
  if (cfg.strategy != Strategy::DynamicRes) throw ConfigError("plan_dynamic_resolution needs strategy dynres");
  cfg.validate();
  require_image(width, height);

  const std::int64_t p2 = cfg.patch_px * cfg.patch_px;
  const std::int64_t target = std::clamp(width * height, cfg.min_patches * p2, cfg.max_patches * p2);

  std::optional<GridChoice> best;
  auto consider = [&](std::int64_t cols, std::int64_t rows) {
    GridChoice c{cols, rows, Distortion::of(cols, rows, width, height), 0};
    c.area_gap = std::abs(cols * rows * p2 - target);
    if (!best) {
      best = c;
      return;
    }
    const int d = c.distortion.compare(best->distortion);
    if (d != 0) {
      if (d < 0) best = c;
      return;
    }
    if (c.area_gap != best->area_gap) {
      if (c.area_gap < best->area_gap) best = c;
      return;
    }
    if (c.cols != best->cols) {
      if (c.cols > best->cols) best = c;
      return;
    }
    if (c.rows > best->rows) best = c;
  };

  for (std::int64_t cols = 1; cols <= cfg.max_patches; ++cols) {
    const std::int64_t lo = std::max<std::int64_t>(1, ceil_div(cfg.min_patches, cols));
    const std::int64_t hi = cfg.max_patches / cols;
    if (lo > hi) continue;
    const std::int64_t below = (cols * height) / width;
    for (std::int64_t rows : {below, below + 1}) consider(cols, std::clamp(rows, lo, hi));
  }

  PatchPlan plan;
  plan.config = cfg;
  plan.source_size = {width, height};
  plan.grid = {best->cols, best->rows};
  plan.resized_size = {best->cols * cfg.patch_px, best->rows * cfg.patch_px};
  plan.scales = {1};
  plan.token_count = best->cols * best->rows;
  return plan;
}

PatchPlan plan_dynamic_s2(std::int64_t width, std::int64_t height, const StrategyConfig& cfg) {
  if (cfg.strategy != Strategy::DynamicS2) throw ConfigError("plan_dynamic_s2 needs strategy dynamic-s2");
  cfg.validate();
  require_image(width, height);

  const std::int64_t max_tiles = cfg.max_tokens / cfg.tokens_per_tile;
  const std::int64_t tile_area = cfg.tile_px * cfg.tile_px;
  const std::int64_t native = std::clamp(width * height, tile_area, max_tiles * tile_area);
  std::optional<GridChoice> best;
  auto consider = [&](std::int64_t cols, std::int64_t rows) {
    GridChoice c{cols, rows, Distortion::of(cols, rows, width, height), 0};
    if (!best) {
      best = c;
      return;
    }
    const int d = c.distortion.compare(best->distortion);
    if (d != 0) {
      if (d < 0) best = c;
      return;
    }
    const std::int64_t area = cols * rows;
    const std::int64_t best_area = best->cols * best->rows;
    const std::int64_t dev = std::abs(area * tile_area - native);
    const std::int64_t best_dev = std::abs(best_area * tile_area - native);
    if (dev != best_dev) {
      if (dev < best_dev) best = c;
      return;
    }
    if (area != best_area) {
      if (area > best_area) best = c;
      return;
    }
    if (cols > best->cols) best = c;
  };

  for (std::int64_t cols = 1; cols <= max_tiles; ++cols) {
    const std::int64_t hi = max_tiles / cols;
    const std::int64_t below = (cols * height) / width;
    for (std::int64_t rows : {below, below + 1}) consider(cols, std::clamp<std::int64_t>(rows, 1, hi));
  }

  PatchPlan plan;
  plan.config = cfg;
  plan.source_size = {width, height};
  plan.grid = {best->cols, best->rows};
  plan.resized_size = {best->cols * cfg.tile_px, best->rows * cfg.tile_px};
  for (std::int64_t r = 0; r < best->rows; ++r) {
    for (std::int64_t c = 0; c < best->cols; ++c) {
      plan.crops.push_back({{c * cfg.tile_px, r * cfg.tile_px}, {cfg.tile_px, cfg.tile_px}, {0, 0}});
    }
  }
  plan.scales = cfg.s2_scales;
  plan.token_count = best->cols * best->rows * cfg.tokens_per_tile;
  return plan;
}

namespace {

struct AxisCrops {
  std::vector<std::int64_t> offsets;
  std::int64_t pad = 0;
};

AxisCrops axis_crops(std::int64_t dim, std::int64_t tile) {
  AxisCrops out;
  const std::int64_t n = ceil_div(dim, tile);
  if (n <= 1) {
    out.offsets = {0};
    out.pad = tile - dim;
    return out;
  }
  const std::int64_t span = dim - tile;
  for (std::int64_t i = 0; i < n; ++i) {
    // round(i * span / (n - 1)), halves rounded up
    out.offsets.push_back((2 * i * span + (n - 1)) / (2 * (n - 1)));
  }
  return out;
}

}  // namespace

PatchPlan plan_multicrop(std::int64_t width, std::int64_t height, const StrategyConfig& cfg) {
  if (cfg.strategy != Strategy::MultiCrop && cfg.strategy != Strategy::MultiCropS2) {
    throw ConfigError("plan_multicrop needs strategy multicrop or multicrop-s2");
  }
  cfg.validate();
  require_image(width, height);

  const std::int64_t tile = cfg.tile_px;
  const std::int64_t max_crops = cfg.max_tokens / cfg.tokens_per_tile;

  Size working{width, height};
  if (ceil_div(width, tile) * ceil_div(height, tile) > max_crops) {
    // For a crop layout (nx, ny) every s below min((nx*t+1)/W, (ny*t+1)/H)
    // keeps floor(sW) <= nx*t and floor(sH) <= ny*t. The working size is the
    // limit of the floors as s approaches that bound from below, taken over
    // the layout with the largest bound (tracked as the exact fraction num/den).
    std::int64_t num = 0;
    std::int64_t den = 1;
    for (std::int64_t nx = 1; nx <= max_crops; ++nx) {
      const std::int64_t ny = max_crops / nx;
      std::int64_t n = nx * tile + 1;
      std::int64_t d = width;
      if (static_cast<i128>(ny * tile + 1) * d < static_cast<i128>(n) * height) {
        n = ny * tile + 1;
        d = height;
      }
      if (static_cast<i128>(n) * den > static_cast<i128>(num) * d) {
        num = n;
        den = d;
      }
    }
    auto below = [&](std::int64_t dim) {
      const i128 scaled = static_cast<i128>(dim) * num;
      return std::max<std::int64_t>(1, static_cast<std::int64_t>((scaled + den - 1) / den) - 1);
    };
    working.w = below(width);
    working.h = below(height);
  }

  const AxisCrops xs = axis_crops(working.w, tile);
  const AxisCrops ys = axis_crops(working.h, tile);

  PatchPlan plan;
  plan.config = cfg;
  plan.source_size = {width, height};
  plan.resized_size = working;
  plan.grid = {static_cast<std::int64_t>(xs.offsets.size()), static_cast<std::int64_t>(ys.offsets.size())};
  for (std::int64_t y : ys.offsets) {
    for (std::int64_t x : xs.offsets) {
      plan.crops.push_back({{x, y}, {tile, tile}, {xs.pad, ys.pad}});
    }
  }
  plan.scales = cfg.strategy == Strategy::MultiCropS2 ? cfg.s2_scales : std::vector<int>{1};
  plan.token_count = static_cast<std::int64_t>(plan.crops.size()) * cfg.tokens_per_tile;
  return plan;
}

PatchPlan plan_image(std::int64_t width, std::int64_t height, const StrategyConfig& cfg) {
  switch (cfg.strategy) {
    case Strategy::DynamicRes: return plan_dynamic_resolution(width, height, cfg);
    case Strategy::DynamicS2: return plan_dynamic_s2(width, height, cfg);
    case Strategy::MultiCrop:
    case Strategy::MultiCropS2: return plan_multicrop(width, height, cfg);
  }
  throw ConfigError("unknown strategy");
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::ordered_json size_json(const Size& s) { return nlohmann::ordered_json::array({s.w, s.h}); }

Size size_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw InputError("expected a [w, h] pair");
  return {j[0].get<std::int64_t>(), j[1].get<std::int64_t>()};
}

}  // namespace

nlohmann::ordered_json to_json(const PatchPlan& plan) {
  const StrategyConfig& c = plan.config;
  nlohmann::ordered_json cfg;
  cfg["patch_px"] = c.patch_px;
  cfg["tile_px"] = c.tile_px;
  cfg["tokens_per_tile"] = c.tokens_per_tile;
  cfg["max_tokens"] = c.max_tokens;
  cfg["min_patches"] = c.min_patches;
  cfg["max_patches"] = c.max_patches;
  cfg["s2_scales"] = c.s2_scales;
  cfg["pad_value"] = c.pad_value;

  nlohmann::ordered_json j;
  j["strategy"] = std::string(to_string(c.strategy));
  j["config"] = cfg;
  j["source_size"] = size_json(plan.source_size);
  j["resized_size"] = size_json(plan.resized_size);
  j["grid"] = size_json(plan.grid);
  auto crops = nlohmann::ordered_json::array();
  for (const CropSpec& crop : plan.crops) {
    nlohmann::ordered_json cj;
    cj["offset"] = nlohmann::ordered_json::array({crop.offset.x, crop.offset.y});
    cj["size"] = size_json(crop.size);
    cj["pad"] = size_json(crop.pad);
    crops.push_back(cj);
  }
  j["crops"] = crops;
  j["scales"] = plan.scales;
  j["token_count"] = plan.token_count;
  return j;
}

PatchPlan plan_from_json(const nlohmann::json& j) {
  try {
    PatchPlan plan;
    const auto strategy = parse_strategy(j.at("strategy").get<std::string>());
    if (!strategy) throw InputError("unknown strategy in plan JSON");
    plan.config.strategy = *strategy;
    const auto& c = j.at("config");
    plan.config.patch_px = c.at("patch_px").get<std::int64_t>();
    plan.config.tile_px = c.at("tile_px").get<std::int64_t>();
    plan.config.tokens_per_tile = c.at("tokens_per_tile").get<std::int64_t>();
    plan.config.max_tokens = c.at("max_tokens").get<std::int64_t>();
    plan.config.min_patches = c.at("min_patches").get<std::int64_t>();
    plan.config.max_patches = c.at("max_patches").get<std::int64_t>();
    plan.config.s2_scales = c.at("s2_scales").get<std::vector<int>>();
    plan.config.pad_value = c.at("pad_value").get<std::uint8_t>();
    plan.source_size = size_from(j.at("source_size"));
    plan.resized_size = size_from(j.at("resized_size"));
    plan.grid = size_from(j.at("grid"));
    for (const auto& cj : j.at("crops")) {
      const Size off = size_from(cj.at("offset"));
      plan.crops.push_back({{off.w, off.h}, size_from(cj.at("size")), size_from(cj.at("pad"))});
    }
    plan.scales = j.at("scales").get<std::vector<int>>();
    plan.token_count = j.at("token_count").get<std::int64_t>();
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed plan JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Coordinates

bool NormPoint::in_range() const { return x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0; }

bool NormRect::in_range() const {
  return x >= 0.0 && y >= 0.0 && w >= 0.0 && h >= 0.0 && x + w <= 1.0 && y + h <= 1.0;
}

bool NormRect::contains(const NormPoint& p) const {
  return p.x >= x && p.x <= x + w && p.y >= y && p.y <= y + h;
}

namespace {

// Affine map from source pixels to the target's normalized frame:
// norm = (src * scale - origin) / extent.
struct Frame {
  double scale_x, scale_y;
  double origin_x, origin_y;
  double extent_x, extent_y;
  bool crop;
};

Frame frame_for(const PatchPlan& plan, const CoordTarget& target) {
  const auto src_w = static_cast<double>(plan.source_size.w);
  const auto src_h = static_cast<double>(plan.source_size.h);
  if (std::holds_alternative<GlobalNormalized>(target)) return {1.0, 1.0, 0.0, 0.0, src_w, src_h, false};
  const std::size_t idx = std::get<CropLocal>(target).crop_index;
  if (idx >= plan.crops.size()) {
    throw InputError("crop index " + std::to_string(idx) + " out of range (plan has " +
                     std::to_string(plan.crops.size()) + " crops)");
  }
  const CropSpec& crop = plan.crops[idx];
  const Size content = crop.content();
  return {static_cast<double>(plan.resized_size.w) / src_w,
          static_cast<double>(plan.resized_size.h) / src_h,
          static_cast<double>(crop.offset.x),
          static_cast<double>(crop.offset.y),
          static_cast<double>(content.w),
          static_cast<double>(content.h),
          true};
}

void require_in_source(const PatchPlan& plan, double x, double y) {
  if (!(x >= 0.0 && y >= 0.0 && x <= static_cast<double>(plan.source_size.w) &&
        y <= static_cast<double>(plan.source_size.h))) {
    throw InputError("pixel coordinate outside the source image");
  }
}

NormPoint to_frame(const Frame& f, double x, double y) {
  const double lx = x * f.scale_x - f.origin_x;
  const double ly = y * f.scale_y - f.origin_y;
  if (f.crop && (lx < 0.0 || ly < 0.0 || lx > f.extent_x || ly > f.extent_y)) {
    throw OutOfCropError("point lies outside the selected crop");
  }
  return {lx / f.extent_x, ly / f.extent_y};
}

PixelPoint from_frame(const Frame& f, double nx, double ny) {
  return {(nx * f.extent_x + f.origin_x) / f.scale_x, (ny * f.extent_y + f.origin_y) / f.scale_y};
}

}  // namespace

NormPoint map_coords(const PatchPlan& plan, const PixelPoint& p, const CoordTarget& target) {
  require_in_source(plan, p.x, p.y);
  return to_frame(frame_for(plan, target), p.x, p.y);
}

NormRect map_coords(const PatchPlan& plan, const PixelRect& r, const CoordTarget& target) {
  if (r.w < 0.0 || r.h < 0.0) throw InputError("rect with negative extent");
  require_in_source(plan, r.x, r.y);
  require_in_source(plan, r.x + r.w, r.y + r.h);
  const Frame f = frame_for(plan, target);
  const NormPoint a = to_frame(f, r.x, r.y);
  const NormPoint b = to_frame(f, r.x + r.w, r.y + r.h);
  return {a.x, a.y, b.x - a.x, b.y - a.y};
}

PixelPoint denormalize(const PatchPlan& plan, const NormPoint& p, const CoordTarget& target) {
  return from_frame(frame_for(plan, target), p.x, p.y);
}

PixelRect denormalize(const PatchPlan& plan, const NormRect& r, const CoordTarget& target) {
  const Frame f = frame_for(plan, target);
  const PixelPoint a = from_frame(f, r.x, r.y);
  const PixelPoint b = from_frame(f, r.x + r.w, r.y + r.h);
  return {a.x, a.y, b.x - a.x, b.y - a.y};
}

}  // namespace mmtk
