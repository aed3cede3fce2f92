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

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace slens {

// Channel-major (C x H x W) float image with values nominally in [0, 1].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height + y) * width + x;
  }
  float& at(int c, int y, int x) { return data[index(c, y, x)]; }
  float at(int c, int y, int x) const { return data[index(c, y, x)]; }

  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  bool same_shape(const Image& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  bool operator==(const Image& o) const = default;
};

struct LabeledImage {
  std::string id;  // stable identifier, e.g. "cat/0001.png"
  int label = 0;
  Image image;
};

struct LabeledDataset {
  std::vector<std::string> class_names;
  std::vector<LabeledImage> items;

  int num_classes() const { return static_cast<int>(class_names.size()); }
  std::size_t size() const { return items.size(); }
};

// RGB color as used by palettes and stamps. Single-channel images receive
// the Rec. 601 luma of the color.
using Rgb = std::array<float, 3>;

float luma601(float r, float g, float b);

// Channel value of `color` for an image with `channels` channels.
float color_channel(const Rgb& color, int channels, int c);

}  // namespace slens
