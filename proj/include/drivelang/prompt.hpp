#pragma once

// The unified model-input format: the fixed surround-view prompt, 2D box
// string normalization into [0, 1000), and the inverse parser used when
// scoring free-form model output.

#include <cmath>
#include <optional>
#include <regex>
#include <string>
#include <string_view>

#include "drivelang/types.hpp"

namespace drivelang {

// Versioned prompt constants. Changing either string changes the dataset
// format; bump the version and document it in docs/formats.md.
inline constexpr std::string_view kSurroundPromptV1 =
    "The <image> <image> <image> <image> <image> <image> present an overview "
    "of the surrounding scene of ego vehicles, sequentially from the front "
    "left, front, front right, back left, back, and back right perspectives "
    "of the ego vehicle";

inline constexpr std::string_view kEmbeddingSegmentV1 =
    " Output the 3D bounding boxes of the referred objects using <embedding>.";

inline constexpr std::string_view kSingleImagePromptV1 = "<image>\n";

// Fixed per-task model preamble: the six-view prompt, with the
// <embedding> instruction appended for 3D visual grounding.
inline std::string build_surround_prompt(TaskKind task) {
  std::string out(kSurroundPromptV1);
  if (task == TaskKind::VG3D) {
    out += kEmbeddingSegmentV1;
  }
  return out;
}

// Maps pixel coordinates into the integer range [0, 1000) by
// floor(value / extent * 1000), clamped to 999, and renders the box as
// "(X_tl, Y_tl), (X_br, Y_br)".
inline std::string normalize_box2d(const Box2D& box, double image_w, double image_h) {
  if (!(image_w > 0.0 && image_h > 0.0)) {
    throw ValidationError("normalize_box2d: image extents must be positive");
  }
  if (box.x2 > image_w || box.y2 > image_h) {
    throw ValidationError("normalize_box2d: box exceeds the image bounds");
  }
  auto quantize = [](double value, double extent) {
    const long q = static_cast<long>(std::floor(value / extent * 1000.0));
    return std::clamp(q, 0L, 999L);
  };
  const long x1 = quantize(box.x1, image_w);
  const long y1 = quantize(box.y1, image_h);
  const long x2 = quantize(box.x2, image_w);
  const long y2 = quantize(box.y2, image_h);
  return "(" + std::to_string(x1) + ", " + std::to_string(y1) + "), (" +
         std::to_string(x2) + ", " + std::to_string(y2) + ")";
}

// Extracts the first well-formed "(a, b), (c, d)" box from arbitrary text.
// Coordinates are in the normalized [0, 1000) space. Returns nullopt for
// unscorable output (no match, out-of-range integers, or a degenerate box).
inline std::optional<Box2D> parse_box2d_string(const std::string& text) {
  static const std::regex pattern(
      R"(\(\s*(\d+)\s*,\s*(\d+)\s*\)\s*,\s*\(\s*(\d+)\s*,\s*(\d+)\s*\))");
  auto begin = std::sregex_iterator(text.begin(), text.end(), pattern);
  const auto end = std::sregex_iterator();
  for (auto it = begin; it != end; ++it) {
    long v[4];
    bool ok = true;
    for (int i = 0; i < 4; ++i) {
      const std::string& s = (*it)[i + 1].str();
      if (s.size() > 4) {
        ok = false;
        break;
      }
      v[i] = std::stol(s);
      if (v[i] < 0 || v[i] >= 1000) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    if (v[0] >= v[2] || v[1] >= v[3]) continue;
    return Box2D(static_cast<double>(v[0]), static_cast<double>(v[1]),
                 static_cast<double>(v[2]), static_cast<double>(v[3]));
  }
  return std::nullopt;
}

// Maps a normalized-space box back to pixels (inverse of normalize_box2d up
// to quantization).
inline Box2D denormalize_box2d(const Box2D& normalized, double image_w,
                               double image_h) {
  return Box2D(normalized.x1 * image_w / 1000.0, normalized.y1 * image_h / 1000.0,
               normalized.x2 * image_w / 1000.0, normalized.y2 * image_h / 1000.0);
}

}  // namespace drivelang
