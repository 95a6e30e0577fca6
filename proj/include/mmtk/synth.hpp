#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmtk/image.hpp"
#include "mmtk/judge.hpp"
#include "mmtk/record.hpp"
#include "mmtk/vision.hpp"

namespace mmtk {

struct SynthConfig {
  std::size_t group_size = 5;
  double insert_prob = 0.2;
  std::uint64_t seed = 0;
  double diff_threshold = 16.0 / 255.0;  // per-pixel max-channel delta, as a fraction of 255
  bool allow_fallback = true;            // describer failure falls back to the pixel diff

  void validate() const;
};

struct CaptionedImage {
  std::string image;
  std::string caption;
};

struct FrameSequence {
  std::vector<std::string> frames;  // 2 or 3 image refs
  std::vector<double> timestamps;   // empty or one per frame
};

// Shows min(|items|, group_size) images, then asks for their captions in a
// seeded random order. With probability insert_prob a further image (the next
// item, when one exists) is shown afterwards and captioned in a second turn.
// meta.request_order holds the 1-based image index of every request.
SampleRecord synth_scrambled(const std::vector<CaptionedImage>& items, const SynthConfig& cfg);

// Shows the images and a seeded shuffle of their captions; the gold answer
// maps caption position -> image index (meta.caption_to_image, 1-based).
SampleRecord synth_caption_match(const std::vector<CaptionedImage>& items, const SynthConfig& cfg);

// Tightest normalized box around the pixels whose max-channel delta exceeds
// the threshold; nullopt when nothing changed.
std::optional<NormRect> diff_region(const Image& a, const Image& b, const SynthConfig& cfg);

// Sentence used when no describer is available.
std::string describe_change(const std::optional<NormRect>& rect);

// One question/answer round per consecutive frame pair.
SampleRecord synth_whats_changed(const FrameSequence& seq, const std::vector<Image>& frames, JudgeClient* describer,
                                 const SynthConfig& cfg);
SampleRecord synth_whats_changed(const FrameSequence& seq, JudgeClient* describer, const SynthConfig& cfg);

}  // namespace mmtk
