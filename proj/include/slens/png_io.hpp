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

#include <filesystem>

#include "slens/image.hpp"

namespace slens {

struct PngInfo {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1, 2, 3 or 4 as stored
};

// Reads only the header.
PngInfo read_png_info(const std::filesystem::path& path);

// Decodes to float in [0, 1]. Gray and RGB are returned as 1 and 3
// channels; an alpha channel is dropped unless keep_alpha is set.
Image read_png(const std::filesystem::path& path, bool keep_alpha = false);

// Writes 1, 3 or 4 channel images as 8-bit PNG. Values are clipped to
// [0, 1] and rounded to the nearest of 256 levels.
void write_png(const std::filesystem::path& path, const Image& image);

inline float quantize8(float v) {
  float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<float>(static_cast<int>(c * 255.0f + 0.5f)) / 255.0f;
}

}  // namespace slens
