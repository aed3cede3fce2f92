/*
 * Copyright 2026 The shortcut-lens Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "slens/image.hpp"
#include "slens/rng.hpp"

namespace slens {

enum class ShortcutKind { color_dot, location_dot, logo, watermark };

std::string to_string(ShortcutKind kind);
ShortcutKind shortcut_kind_from_string(const std::string& name);

struct PixelPoint {
  int x = 0;
  int y = 0;
  bool operator==(const PixelPoint&) const = default;
};

// RGBA bitmap composited by the logo shortcut.
struct Stamp {
  int height = 0;
  int width = 0;
  std::vector<Rgb> color;    // row-major, height * width
  std::vector<float> alpha;  // row-major, height * width, in [0, 1]

  bool operator==(const Stamp&) const = default;
};

// 8x8 glyph used when a logo spec carries no stamp of its own.
Stamp builtin_stamp();

// Text tiled across the whole image by the watermark shortcut.
struct WatermarkPattern {
  std::vector<std::string> class_text;  // one string per class
  int tile_width = 16;
  int tile_height = 8;
  int glyph_scale = 1;  // each font pixel becomes glyph_scale^2 image pixels
  float alpha = 0.35f;
  Rgb color{1.0f, 1.0f, 1.0f};
  bool random_offset = true;  // rng-drawn tile phase per image

  bool operator==(const WatermarkPattern&) const = default;
};

struct ShortcutSpec {
  ShortcutKind kind = ShortcutKind::color_dot;
  int num_classes = 10;
  // Disc radius for the dot kinds. 0 selects ceil(5% of min(height, width)).
  int radius = 0;
  // color_dot: one color per class. location_dot: palette[0] is the color.
  std::vector<Rgb> palette;
  // location_dot: disc center per class.
  std::vector<PixelPoint> anchor_map;
  // logo: stamps plus, per class, the index of its stamp or -1 for none.
  std::vector<Stamp> stamps;
  std::vector<int> class_stamp;
  std::optional<PixelPoint> logo_position;  // top-left; rng-drawn when unset
  WatermarkPattern watermark;
  double apply_probability = 1.0;
  std::uint64_t seed = 0;

  bool operator==(const ShortcutSpec&) const = default;
};

// Hue-spread palette: color k is fully saturated hue k / count.
std::vector<Rgb> spread_palette(int count);

// Anchors spaced around a ring, inset so a disc of `radius` fits.
std::vector<PixelPoint> default_anchors(int count, int height, int width, int radius);

// Fills every unset optional field with its documented default for
// images of the given size.
ShortcutSpec with_defaults(ShortcutSpec spec, int height, int width);

// Throws InvalidSpecError describing the first violated invariant.
void validate(const ShortcutSpec& spec, int height, int width);

int effective_radius(const ShortcutSpec& spec, int height, int width);

struct Placement {
  PixelPoint position;  // disc center, stamp top-left or tile phase
  bool operator==(const Placement&) const = default;
};

// The single-image operations. Each validates its preconditions, draws any
// placement it needs from `rng` and returns the perturbed image. `placement`
// receives the position used.
Image inject_color_dot(const Image& image, int label, const ShortcutSpec& spec,
                       RngStream& rng, Placement* placement = nullptr);
Image inject_location_dot(const Image& image, int label, const ShortcutSpec& spec,
                          RngStream& rng, Placement* placement = nullptr);
Image inject_logo(const Image& image, int label, const ShortcutSpec& spec,
                  RngStream& rng, Placement* placement = nullptr);
Image inject_watermark(const Image& image, int label, const ShortcutSpec& spec,
                       RngStream& rng, Placement* placement = nullptr);

// Applies the shortcut at a known placement without consuming randomness.
Image apply_at(const Image& image, int label, const ShortcutSpec& spec,
               const Placement& placement);

// Per-pixel mask (height x width) of the pixels the shortcut may modify.
// Watermarks report only the glyph pixels.
std::vector<std::uint8_t> footprint(int label, const ShortcutSpec& spec, int height,
                                    int width, const Placement& placement);

// Watermark glyph mask for `label` at tile phase `offset`.
std::vector<std::uint8_t> watermark_mask(const WatermarkPattern& pattern, int label,
                                         int height, int width, PixelPoint offset);

struct InjectionRecord {
  std::string id;
  int label = 0;
  bool applied = false;
  std::optional<Placement> placement;
  std::uint64_t rng_draws = 0;  // raw draws consumed from the image's stream

  bool operator==(const InjectionRecord&) const = default;
};

struct InjectionManifest {
  static constexpr int kFormatVersion = 1;
  int version = kFormatVersion;
  ShortcutSpec spec;
  int height = 0;
  int width = 0;
  std::vector<InjectionRecord> records;

  const InjectionRecord* find(const std::string& id) const;
  bool operator==(const InjectionManifest&) const = default;
};

// Seed of the stream used for the image with identifier `id`.
std::uint64_t image_stream_seed(std::uint64_t spec_seed, const std::string& id);

// Injects one image with its own derived stream; the apply decision is the
// first draw.
LabeledImage inject_one(const LabeledImage& item, const ShortcutSpec& spec,
                        InjectionRecord* record);

struct ShortcutDataset {
  LabeledDataset dataset;
  InjectionManifest manifest;
};

ShortcutDataset build_shortcut_dataset(const LabeledDataset& clean, ShortcutSpec spec);

// Re-applies the recorded decisions to the clean dataset.
LabeledDataset replay(const InjectionManifest& manifest, const LabeledDataset& clean);

nlohmann::json to_json(const ShortcutSpec& spec);
ShortcutSpec shortcut_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const InjectionManifest& manifest);
InjectionManifest manifest_from_json(const nlohmann::json& j);

}  // namespace slens
