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

#include "slens/shortcut.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "slens/errors.hpp"

namespace slens {

using nlohmann::json;

std::string to_string(ShortcutKind kind) {
  switch (kind) {
    case ShortcutKind::color_dot: return "color_dot";
    case ShortcutKind::location_dot: return "location_dot";
    case ShortcutKind::logo: return "logo";
    case ShortcutKind::watermark: return "watermark";
  }
  return "unknown";
}

ShortcutKind shortcut_kind_from_string(const std::string& name) {
  if (name == "color_dot") return ShortcutKind::color_dot;
  if (name == "location_dot") return ShortcutKind::location_dot;
  if (name == "logo") return ShortcutKind::logo;
  if (name == "watermark") return ShortcutKind::watermark;
  throw InvalidSpecError("unknown shortcut kind '" + name + "'");
}

namespace {

float clip01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

Rgb hsv_to_rgb(double h, double s, double v) {
  const double hh = std::fmod(h, 1.0) * 6.0;
  const int sector = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  double r = 0, g = 0, b = 0;
  switch (sector) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
  return {static_cast<float>(r), static_cast<float>(g), static_cast<float>(b)};
}

// 3x5 font, one 3-bit row mask per line, most significant bit on the left.
const std::unordered_map<char, std::array<std::uint8_t, 5>>& font() {
  static const std::unordered_map<char, std::array<std::uint8_t, 5>> table = {
      {'0', {07, 05, 05, 05, 07}}, {'1', {02, 06, 02, 02, 07}},
      {'2', {07, 01, 07, 04, 07}}, {'3', {07, 01, 07, 01, 07}},
      {'4', {05, 05, 07, 01, 01}}, {'5', {07, 04, 07, 01, 07}},
      {'6', {07, 04, 07, 05, 07}}, {'7', {07, 01, 01, 02, 02}},
      {'8', {07, 05, 07, 05, 07}}, {'9', {07, 05, 07, 01, 07}},
      {'A', {02, 05, 07, 05, 05}}, {'B', {06, 05, 06, 05, 06}},
      {'C', {03, 04, 04, 04, 03}}, {'D', {06, 05, 05, 05, 06}},
      {'E', {07, 04, 06, 04, 07}}, {'F', {07, 04, 06, 04, 04}},
      {'G', {03, 04, 05, 05, 03}}, {'H', {05, 05, 07, 05, 05}},
      {'I', {07, 02, 02, 02, 07}}, {'J', {01, 01, 01, 05, 02}},
      {'K', {05, 05, 06, 05, 05}}, {'L', {04, 04, 04, 04, 07}},
      {'M', {05, 07, 07, 05, 05}}, {'N', {06, 05, 05, 05, 05}},
      {'O', {02, 05, 05, 05, 02}}, {'P', {06, 05, 06, 04, 04}},
      {'Q', {02, 05, 05, 06, 03}}, {'R', {06, 05, 06, 05, 05}},
      {'S', {03, 04, 02, 01, 06}}, {'T', {07, 02, 02, 02, 02}},
      {'U', {05, 05, 05, 05, 07}}, {'V', {05, 05, 05, 05, 02}},
      {'W', {05, 05, 07, 07, 05}}, {'X', {05, 05, 02, 05, 05}},
      {'Y', {05, 05, 02, 02, 02}}, {'Z', {07, 01, 02, 04, 07}},
  };
  return table;
}

bool in_disc(int x, int y, PixelPoint c, int r) {
  const int dx = x - c.x, dy = y - c.y;
  return dx * dx + dy * dy <= r * r;
}

void paint_disc(Image& img, PixelPoint center, int r, const Rgb& color) {
  for (int y = std::max(0, center.y - r); y <= std::min(img.height - 1, center.y + r); ++y)
    for (int x = std::max(0, center.x - r); x <= std::min(img.width - 1, center.x + r); ++x)
      if (in_disc(x, y, center, r))
        for (int c = 0; c < img.channels; ++c)
          img.at(c, y, x) = clip01(color_channel(color, img.channels, c));
}

void composite_stamp(Image& img, const Stamp& stamp, PixelPoint top_left) {
  for (int sy = 0; sy < stamp.height; ++sy) {
    for (int sx = 0; sx < stamp.width; ++sx) {
      const std::size_t k = static_cast<std::size_t>(sy) * stamp.width + sx;
      const float a = stamp.alpha[k];
      if (a <= 0.0f) continue;
      const int y = top_left.y + sy, x = top_left.x + sx;
      for (int c = 0; c < img.channels; ++c) {
        const float s = color_channel(stamp.color[k], img.channels, c);
        img.at(c, y, x) = clip01(a * s + (1.0f - a) * img.at(c, y, x));
      }
    }
  }
}

void check_label(const ShortcutSpec& spec, int label) {
  if (label < 0 || label >= spec.num_classes)
    throw InvalidSpecError("label " + std::to_string(label) + " outside class range [0, " +
                           std::to_string(spec.num_classes) + ")");
}

void check_kind(const ShortcutSpec& spec, ShortcutKind want) {
  if (spec.kind != want)
    throw InvalidSpecError("spec kind is " + to_string(spec.kind) + ", expected " +
                           to_string(want));
}

}  // namespace

Stamp builtin_stamp() {
  static const char* rows[8] = {
      "..XXXX..", ".XOOOOX.", "XOOXXOOX", "XOXOOXOX",
      "XOXOOXOX", "XOOXXOOX", ".XOOOOX.", "..XXXX..",
  };
  Stamp s;
  s.height = 8;
  s.width = 8;
  for (const char* row : rows) {
    for (int x = 0; x < 8; ++x) {
      switch (row[x]) {
        case 'X': s.color.push_back({0.1f, 0.1f, 0.6f}); s.alpha.push_back(1.0f); break;
        case 'O': s.color.push_back({1.0f, 0.85f, 0.1f}); s.alpha.push_back(1.0f); break;
        default: s.color.push_back({0.0f, 0.0f, 0.0f}); s.alpha.push_back(0.0f); break;
      }
    }
  }
  return s;
}

std::vector<Rgb> spread_palette(int count) {
  std::vector<Rgb> out;
  for (int k = 0; k < count; ++k) out.push_back(hsv_to_rgb(static_cast<double>(k) / count, 1.0, 1.0));
  return out;
}

std::vector<PixelPoint> default_anchors(int count, int height, int width, int radius) {
  std::vector<PixelPoint> out;
  const double cx = (width - 1) / 2.0, cy = (height - 1) / 2.0;
  const double ring = std::max(0.0, std::min(height, width) / 2.0 - radius - 2.0);
  for (int k = 0; k < count; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / count - std::numbers::pi / 2.0;
    int x = static_cast<int>(std::lround(cx + ring * std::cos(theta)));
    int y = static_cast<int>(std::lround(cy + ring * std::sin(theta)));
    x = std::clamp(x, radius, std::max(radius, width - 1 - radius));
    y = std::clamp(y, radius, std::max(radius, height - 1 - radius));
    out.push_back({x, y});
  }
  return out;
}

int effective_radius(const ShortcutSpec& spec, int height, int width) {
  if (spec.radius > 0) return spec.radius;
  return static_cast<int>(std::ceil(0.05 * std::min(height, width)));
}

ShortcutSpec with_defaults(ShortcutSpec spec, int height, int width) {
  switch (spec.kind) {
    case ShortcutKind::color_dot:
      spec.radius = effective_radius(spec, height, width);
      if (spec.palette.empty()) spec.palette = spread_palette(spec.num_classes);
      break;
    case ShortcutKind::location_dot:
      spec.radius = effective_radius(spec, height, width);
      if (spec.palette.empty()) spec.palette = {Rgb{1.0f, 0.0f, 1.0f}};
      if (spec.anchor_map.empty())
        spec.anchor_map = default_anchors(spec.num_classes, height, width, spec.radius);
      break;
    case ShortcutKind::logo:
      if (spec.stamps.empty()) spec.stamps = {builtin_stamp()};
      if (spec.class_stamp.empty()) {
        spec.class_stamp.assign(spec.num_classes, -1);
        if (spec.num_classes > 0) spec.class_stamp[0] = 0;
      }
      break;
    case ShortcutKind::watermark:
      if (spec.watermark.class_text.empty())
        for (int k = 0; k < spec.num_classes; ++k)
          spec.watermark.class_text.push_back("C" + std::to_string(k));
      break;
  }
  return spec;
}

void validate(const ShortcutSpec& spec, int height, int width) {
  if (spec.num_classes < 1) throw InvalidSpecError("num_classes must be >= 1");
  if (!(spec.apply_probability >= 0.0 && spec.apply_probability <= 1.0))
    throw InvalidSpecError("apply_probability must lie in [0, 1]");
  const auto dot_fits = [&](PixelPoint c, int r) {
    return c.x - r >= 0 && c.y - r >= 0 && c.x + r < width && c.y + r < height;
  };
  switch (spec.kind) {
    case ShortcutKind::color_dot: {
      if (spec.radius < 1) throw InvalidSpecError("radius must be >= 1");
      if (2 * spec.radius + 1 > std::min(height, width))
        throw InvalidSpecError("radius " + std::to_string(spec.radius) + " too large for " +
                               std::to_string(width) + "x" + std::to_string(height) + " image");
      if (static_cast<int>(spec.palette.size()) != spec.num_classes)
        throw InvalidSpecError("palette has " + std::to_string(spec.palette.size()) +
                               " colors for " + std::to_string(spec.num_classes) + " classes");
      break;
    }
    case ShortcutKind::location_dot: {
      if (spec.radius < 1) throw InvalidSpecError("radius must be >= 1");
      if (spec.palette.empty()) throw InvalidSpecError("location_dot needs a color");
      if (static_cast<int>(spec.anchor_map.size()) < spec.num_classes)
        throw InvalidSpecError("anchor_map has no entry for class " +
                               std::to_string(spec.anchor_map.size()));
      for (std::size_t k = 0; k < spec.anchor_map.size(); ++k)
        if (!dot_fits(spec.anchor_map[k], spec.radius))
          throw InvalidSpecError("dot for class " + std::to_string(k) + " at (" +
                                 std::to_string(spec.anchor_map[k].x) + ", " +
                                 std::to_string(spec.anchor_map[k].y) +
                                 ") leaves the image");
      break;
    }
    case ShortcutKind::logo: {
      if (static_cast<int>(spec.class_stamp.size()) != spec.num_classes)
        throw InvalidSpecError("class_stamp needs one entry per class");
      for (int idx : spec.class_stamp)
        if (idx < -1 || idx >= static_cast<int>(spec.stamps.size()))
          throw InvalidSpecError("class_stamp refers to missing stamp " + std::to_string(idx));
      for (const Stamp& s : spec.stamps) {
        const std::size_t n = static_cast<std::size_t>(s.height) * s.width;
        if (s.height < 1 || s.width < 1 || s.color.size() != n || s.alpha.size() != n)
          throw InvalidSpecError("malformed stamp");
        if (s.height > height || s.width > width)
          throw InvalidSpecError("stamp " + std::to_string(s.width) + "x" +
                                 std::to_string(s.height) + " larger than image");
        for (float a : s.alpha)
          if (!(a >= 0.0f && a <= 1.0f)) throw InvalidSpecError("stamp alpha outside [0, 1]");
        if (spec.logo_position) {
          const PixelPoint p = *spec.logo_position;
          if (p.x < 0 || p.y < 0 || p.x + s.width > width || p.y + s.height > height)
            throw InvalidSpecError("stamp at logo_position leaves the image");
        }
      }
      break;
    }
    case ShortcutKind::watermark: {
      const WatermarkPattern& w = spec.watermark;
      if (static_cast<int>(w.class_text.size()) != spec.num_classes)
        throw InvalidSpecError("watermark needs one text per class");
      if (w.tile_width < 1 || w.tile_height < 1 || w.glyph_scale < 1)
        throw InvalidSpecError("watermark tile and glyph scale must be positive");
      if (!(w.alpha >= 0.0f && w.alpha <= 1.0f))
        throw InvalidSpecError("watermark alpha outside [0, 1]");
      break;
    }
  }
}

Image inject_color_dot(const Image& image, int label, const ShortcutSpec& raw,
                       RngStream& rng, Placement* placement) {
  check_kind(raw, ShortcutKind::color_dot);
  const ShortcutSpec spec = with_defaults(raw, image.height, image.width);
  validate(spec, image.height, image.width);
  check_label(spec, label);
  const int r = spec.radius;
  Placement p;
  p.position.x = static_cast<int>(rng.uniform_int(r, image.width - 1 - r));
  p.position.y = static_cast<int>(rng.uniform_int(r, image.height - 1 - r));
  if (placement) *placement = p;
  return apply_at(image, label, spec, p);
}

Image inject_location_dot(const Image& image, int label, const ShortcutSpec& raw,
                          RngStream& /*rng*/, Placement* placement) {
  check_kind(raw, ShortcutKind::location_dot);
  const ShortcutSpec spec = with_defaults(raw, image.height, image.width);
  validate(spec, image.height, image.width);
  check_label(spec, label);
  const Placement p{spec.anchor_map[static_cast<std::size_t>(label)]};
  if (placement) *placement = p;
  return apply_at(image, label, spec, p);
}

Image inject_logo(const Image& image, int label, const ShortcutSpec& raw, RngStream& rng,
                  Placement* placement) {
  check_kind(raw, ShortcutKind::logo);
  const ShortcutSpec spec = with_defaults(raw, image.height, image.width);
  validate(spec, image.height, image.width);
  check_label(spec, label);
  const int idx = spec.class_stamp[static_cast<std::size_t>(label)];
  if (idx < 0) return image;
  const Stamp& s = spec.stamps[static_cast<std::size_t>(idx)];
  Placement p;
  if (spec.logo_position) {
    p.position = *spec.logo_position;
  } else {
    p.position.x = static_cast<int>(rng.uniform_int(0, image.width - s.width));
    p.position.y = static_cast<int>(rng.uniform_int(0, image.height - s.height));
  }
  if (placement) *placement = p;
  return apply_at(image, label, spec, p);
}

Image inject_watermark(const Image& image, int label, const ShortcutSpec& raw,
                       RngStream& rng, Placement* placement) {
  check_kind(raw, ShortcutKind::watermark);
  const ShortcutSpec spec = with_defaults(raw, image.height, image.width);
  validate(spec, image.height, image.width);
  check_label(spec, label);
  Placement p;
  if (spec.watermark.random_offset) {
    p.position.x = static_cast<int>(rng.uniform_int(0, spec.watermark.tile_width - 1));
    p.position.y = static_cast<int>(rng.uniform_int(0, spec.watermark.tile_height - 1));
  }
  if (placement) *placement = p;
  return apply_at(image, label, spec, p);
}

std::vector<std::uint8_t> watermark_mask(const WatermarkPattern& w, int label, int height,
                                         int width, PixelPoint offset) {
  const std::string& text = w.class_text.at(static_cast<std::size_t>(label));
  std::vector<std::uint8_t> tile(static_cast<std::size_t>(w.tile_width) * w.tile_height, 0);
  const int s = w.glyph_scale;
  for (std::size_t k = 0; k < text.size(); ++k) {
    const char ch = static_cast<char>(std::toupper(static_cast<unsigned char>(text[k])));
    const auto it = font().find(ch);
    if (it == font().end()) continue;
    for (int gy = 0; gy < 5; ++gy) {
      for (int gx = 0; gx < 3; ++gx) {
        if (!((it->second[gy] >> (2 - gx)) & 1)) continue;
        for (int dy = 0; dy < s; ++dy) {
          for (int dx = 0; dx < s; ++dx) {
            const int tx = 1 + static_cast<int>(k) * 4 * s + gx * s + dx;
            const int ty = 1 + gy * s + dy;
            if (tx < w.tile_width && ty < w.tile_height)
              tile[static_cast<std::size_t>(ty) * w.tile_width + tx] = 1;
          }
        }
      }
    }
  }
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(height) * width, 0);
  for (int y = 0; y < height; ++y) {
    const int ty = (y + offset.y) % w.tile_height;
    for (int x = 0; x < width; ++x) {
      const int tx = (x + offset.x) % w.tile_width;
      mask[static_cast<std::size_t>(y) * width + x] =
          tile[static_cast<std::size_t>(ty) * w.tile_width + tx];
    }
  }
  return mask;
}

Image apply_at(const Image& image, int label, const ShortcutSpec& raw,
               const Placement& placement) {
  const ShortcutSpec spec = with_defaults(raw, image.height, image.width);
  check_label(spec, label);
  Image out = image;
  switch (spec.kind) {
    case ShortcutKind::color_dot:
      paint_disc(out, placement.position, spec.radius,
                 spec.palette[static_cast<std::size_t>(label)]);
      break;
    case ShortcutKind::location_dot:
      paint_disc(out, placement.position, spec.radius, spec.palette[0]);
      break;
    case ShortcutKind::logo: {
      const int idx = spec.class_stamp[static_cast<std::size_t>(label)];
      if (idx >= 0) composite_stamp(out, spec.stamps[static_cast<std::size_t>(idx)], placement.position);
      break;
    }
    case ShortcutKind::watermark: {
      const WatermarkPattern& w = spec.watermark;
      if (w.alpha <= 0.0f) break;
      const auto mask = watermark_mask(w, label, image.height, image.width, placement.position);
      for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
          if (!mask[static_cast<std::size_t>(y) * out.width + x]) continue;
          for (int c = 0; c < out.channels; ++c) {
            const float s = color_channel(w.color, out.channels, c);
            out.at(c, y, x) = clip01(w.alpha * s + (1.0f - w.alpha) * out.at(c, y, x));
          }
        }
      break;
    }
  }
  return out;
}

std::vector<std::uint8_t> footprint(int label, const ShortcutSpec& raw, int height, int width,
                                    const Placement& placement) {
  const ShortcutSpec spec = with_defaults(raw, height, width);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(height) * width, 0);
  switch (spec.kind) {
    case ShortcutKind::color_dot:
    case ShortcutKind::location_dot:
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
          mask[static_cast<std::size_t>(y) * width + x] =
              in_disc(x, y, placement.position, spec.radius) ? 1 : 0;
      break;
    case ShortcutKind::logo: {
      const int idx = spec.class_stamp.at(static_cast<std::size_t>(label));
      if (idx < 0) break;
      const Stamp& s = spec.stamps[static_cast<std::size_t>(idx)];
      for (int sy = 0; sy < s.height; ++sy)
        for (int sx = 0; sx < s.width; ++sx) {
          const int y = placement.position.y + sy, x = placement.position.x + sx;
          if (y < height && x < width && s.alpha[static_cast<std::size_t>(sy) * s.width + sx] > 0.0f)
            mask[static_cast<std::size_t>(y) * width + x] = 1;
        }
      break;
    }
    case ShortcutKind::watermark:
      mask = watermark_mask(spec.watermark, label, height, width, placement.position);
      break;
  }
  return mask;
}

const InjectionRecord* InjectionManifest::find(const std::string& id) const {
  for (const auto& r : records)
    if (r.id == id) return &r;
  return nullptr;
}

std::uint64_t image_stream_seed(std::uint64_t spec_seed, const std::string& id) {
  return derive_seed(spec_seed, std::string_view(id));
}

LabeledImage inject_one(const LabeledImage& item, const ShortcutSpec& spec,
                        InjectionRecord* record) {
  RngStream rng(image_stream_seed(spec.seed, item.id));
  InjectionRecord rec;
  rec.id = item.id;
  rec.label = item.label;
  LabeledImage out = item;
  if (rng.uniform() < spec.apply_probability) {
    Placement p;
    switch (spec.kind) {
      case ShortcutKind::color_dot: out.image = inject_color_dot(item.image, item.label, spec, rng, &p); break;
      case ShortcutKind::location_dot: out.image = inject_location_dot(item.image, item.label, spec, rng, &p); break;
      case ShortcutKind::logo:
        if (spec.class_stamp.at(static_cast<std::size_t>(item.label)) < 0) break;
        out.image = inject_logo(item.image, item.label, spec, rng, &p);
        break;
      case ShortcutKind::watermark: out.image = inject_watermark(item.image, item.label, spec, rng, &p); break;
    }
    const bool stamped = spec.kind != ShortcutKind::logo ||
                         spec.class_stamp.at(static_cast<std::size_t>(item.label)) >= 0;
    if (stamped) {
      rec.applied = true;
      rec.placement = p;
    }
  }
  rec.rng_draws = rng.draw_count();
  if (record) *record = std::move(rec);
  return out;
}

ShortcutDataset build_shortcut_dataset(const LabeledDataset& clean, ShortcutSpec spec) {
  if (clean.items.empty()) throw InvalidSpecError("dataset is empty");
  const int h = clean.items.front().image.height, w = clean.items.front().image.width;
  if (clean.num_classes() != 0 && clean.num_classes() != spec.num_classes)
    throw InvalidSpecError("spec has " + std::to_string(spec.num_classes) +
                           " classes but dataset has " + std::to_string(clean.num_classes()));
  spec = with_defaults(std::move(spec), h, w);
  validate(spec, h, w);

  ShortcutDataset out;
  out.dataset.class_names = clean.class_names;
  out.dataset.items.resize(clean.items.size());
  out.manifest.spec = spec;
  out.manifest.height = h;
  out.manifest.width = w;
  out.manifest.records.resize(clean.items.size());
  std::set<std::string> seen;
  for (std::size_t i = 0; i < clean.items.size(); ++i) {
    const LabeledImage& item = clean.items[i];
    if (!seen.insert(item.id).second) throw InvalidSpecError("duplicate image id " + item.id);
    if (item.image.height != h || item.image.width != w)
      throw InvalidSpecError("image " + item.id + " differs in size from the first image");
    check_label(spec, item.label);
    out.dataset.items[i] = inject_one(item, spec, &out.manifest.records[i]);
  }
  return out;
}

LabeledDataset replay(const InjectionManifest& manifest, const LabeledDataset& clean) {
  std::unordered_map<std::string, const InjectionRecord*> by_id;
  for (const auto& r : manifest.records) by_id.emplace(r.id, &r);
  LabeledDataset out;
  out.class_names = clean.class_names;
  out.items.reserve(clean.items.size());
  for (const LabeledImage& item : clean.items) {
    const auto it = by_id.find(item.id);
    if (it == by_id.end()) throw InvalidSpecError("manifest has no record for " + item.id);
    LabeledImage li = item;
    if (it->second->applied && it->second->placement)
      li.image = apply_at(item.image, item.label, manifest.spec, *it->second->placement);
    out.items.push_back(std::move(li));
  }
  return out;
}

// ---- JSON ----

namespace {

json rgb_json(const Rgb& c) { return json::array({c[0], c[1], c[2]}); }
Rgb rgb_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw InvalidSpecError("color must be [r, g, b]");
  return {j[0].get<float>(), j[1].get<float>(), j[2].get<float>()};
}

}  // namespace

json to_json(const ShortcutSpec& s) {
  json j;
  j["kind"] = to_string(s.kind);
  j["num_classes"] = s.num_classes;
  j["radius"] = s.radius;
  j["palette"] = json::array();
  for (const auto& c : s.palette) j["palette"].push_back(rgb_json(c));
  j["anchor_map"] = json::array();
  for (const auto& a : s.anchor_map) j["anchor_map"].push_back(json::array({a.x, a.y}));
  j["stamps"] = json::array();
  for (const auto& st : s.stamps) {
    json js{{"height", st.height}, {"width", st.width}, {"alpha", st.alpha}};
    js["color"] = json::array();
    for (const auto& c : st.color) js["color"].push_back(rgb_json(c));
    j["stamps"].push_back(std::move(js));
  }
  j["class_stamp"] = s.class_stamp;
  if (s.logo_position)
    j["logo_position"] = json::array({s.logo_position->x, s.logo_position->y});
  const auto& w = s.watermark;
  j["watermark"] = {{"class_text", w.class_text}, {"tile_width", w.tile_width},
                    {"tile_height", w.tile_height}, {"glyph_scale", w.glyph_scale},
                    {"alpha", w.alpha}, {"color", rgb_json(w.color)},
                    {"random_offset", w.random_offset}};
  j["apply_probability"] = s.apply_probability;
  j["seed"] = s.seed;
  return j;
}

ShortcutSpec shortcut_spec_from_json(const json& j) {
  try {
    ShortcutSpec s;
    s.kind = shortcut_kind_from_string(j.at("kind").get<std::string>());
    s.num_classes = j.value("num_classes", s.num_classes);
    s.radius = j.value("radius", 0);
    if (j.contains("palette"))
      for (const auto& c : j["palette"]) s.palette.push_back(rgb_from(c));
    if (j.contains("anchor_map"))
      for (const auto& a : j["anchor_map"]) s.anchor_map.push_back({a.at(0).get<int>(), a.at(1).get<int>()});
    if (j.contains("stamps"))
      for (const auto& js : j["stamps"]) {
        Stamp st;
        st.height = js.at("height").get<int>();
        st.width = js.at("width").get<int>();
        st.alpha = js.at("alpha").get<std::vector<float>>();
        for (const auto& c : js.at("color")) st.color.push_back(rgb_from(c));
        s.stamps.push_back(std::move(st));
      }
    if (j.contains("class_stamp")) s.class_stamp = j["class_stamp"].get<std::vector<int>>();
    if (j.contains("logo_position") && !j["logo_position"].is_null())
      s.logo_position = PixelPoint{j["logo_position"].at(0).get<int>(), j["logo_position"].at(1).get<int>()};
    if (j.contains("watermark")) {
      const json& w = j["watermark"];
      auto& out = s.watermark;
      if (w.contains("class_text")) out.class_text = w["class_text"].get<std::vector<std::string>>();
      out.tile_width = w.value("tile_width", out.tile_width);
      out.tile_height = w.value("tile_height", out.tile_height);
      out.glyph_scale = w.value("glyph_scale", out.glyph_scale);
      out.alpha = w.value("alpha", out.alpha);
      if (w.contains("color")) out.color = rgb_from(w["color"]);
      out.random_offset = w.value("random_offset", out.random_offset);
    }
    s.apply_probability = j.value("apply_probability", 1.0);
    s.seed = j.value("seed", std::uint64_t{0});
    return s;
  } catch (const json::exception& e) {
    throw InvalidSpecError(std::string("malformed shortcut spec: ") + e.what());
  }
}

json to_json(const InjectionManifest& m) {
  json j;
  j["version"] = m.version;
  j["spec"] = to_json(m.spec);
  j["height"] = m.height;
  j["width"] = m.width;
  j["records"] = json::array();
  for (const auto& r : m.records) {
    json jr{{"id", r.id}, {"label", r.label}, {"applied", r.applied}, {"rng_draws", r.rng_draws}};
    if (r.placement) jr["placement"] = json::array({r.placement->position.x, r.placement->position.y});
    else jr["placement"] = nullptr;
    j["records"].push_back(std::move(jr));
  }
  return j;
}

InjectionManifest manifest_from_json(const json& j) {
  try {
    InjectionManifest m;
    m.version = j.at("version").get<int>();
    if (m.version != InjectionManifest::kFormatVersion)
      throw InvalidSpecError("unsupported manifest version " + std::to_string(m.version));
    m.spec = shortcut_spec_from_json(j.at("spec"));
    m.height = j.at("height").get<int>();
    m.width = j.at("width").get<int>();
    for (const auto& jr : j.at("records")) {
      InjectionRecord r;
      r.id = jr.at("id").get<std::string>();
      r.label = jr.at("label").get<int>();
      r.applied = jr.at("applied").get<bool>();
      r.rng_draws = jr.at("rng_draws").get<std::uint64_t>();
      if (!jr.at("placement").is_null())
        r.placement = Placement{{jr["placement"].at(0).get<int>(), jr["placement"].at(1).get<int>()}};
      m.records.push_back(std::move(r));
    }
    return m;
  } catch (const json::exception& e) {
    throw InvalidSpecError(std::string("malformed manifest: ") + e.what());
  }
}

}  // namespace slens
