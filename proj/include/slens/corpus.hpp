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
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "slens/image.hpp"

namespace slens {

enum class Split { train, test };
std::string to_string(Split split);
Split split_from_string(const std::string& name);

struct TransformChain {
  bool grayscale = false;                      // Rec. 601 luma, one channel
  std::optional<std::pair<int, int>> resize;   // (height, width), bilinear

  std::string describe() const;
  bool operator==(const TransformChain&) const = default;
};

// One image of a dataset. `record` indexes into a packed archive file and
// is -1 for one-file-per-image layouts.
struct ImageRef {
  std::string id;
  int label = 0;
  std::filesystem::path file;
  std::int64_t record = -1;
  bool operator==(const ImageRef&) const = default;
};

struct DatasetHandle {
  std::filesystem::path root;
  Split split = Split::train;
  std::string source;  // "image_folder" or "cifar10_binary"
  std::vector<std::string> class_names;
  std::vector<ImageRef> images;
  int height = 0;  // after transforms
  int width = 0;
  int channels = 0;
  TransformChain transforms;

  std::size_t count() const { return images.size(); }
  int num_classes() const { return static_cast<int>(class_names.size()); }
};

// A dataset on disk. load_dataset() picks the implementation from the
// layout found at the path.
class DatasetSource {
 public:
  virtual ~DatasetSource() = default;
  virtual DatasetHandle open(const std::filesystem::path& root, Split split) const = 0;
  virtual Image read(const DatasetHandle& handle, const ImageRef& ref) const = 0;
};

// root/<split>/<class>/*.png; classes and files in lexicographic order.
class ImageFolderSource final : public DatasetSource {
 public:
  DatasetHandle open(const std::filesystem::path& root, Split split) const override;
  Image read(const DatasetHandle& handle, const ImageRef& ref) const override;
};

// The binary distribution of the 10-class 32x32 research corpus:
// data_batch_{1..5}.bin (train), test_batch.bin (test), each record one
// label byte followed by 3 x 1024 channel-major pixels.
class Cifar10BinarySource final : public DatasetSource {
 public:
  DatasetHandle open(const std::filesystem::path& root, Split split) const override;
  Image read(const DatasetHandle& handle, const ImageRef& ref) const override;
  static bool recognizes(const std::filesystem::path& root);
};

const DatasetSource& source_for(const DatasetHandle& handle);

// Opens `path` for `split`, verifying class folders are non-empty and all
// images share one size unless `transforms` resizes them.
DatasetHandle load_dataset(const std::filesystem::path& path, Split split,
                           const TransformChain& transforms = {});

// Keeps only the named classes, relabelled in the given order.
DatasetHandle select_classes(const DatasetHandle& handle,
                             const std::vector<std::string>& names);

// Class-balanced deterministic subsample preserving the original order.
DatasetHandle subset(const DatasetHandle& handle, int n_per_class, std::uint64_t seed);

// Deterministic permutation of image indices for epoch iteration.
std::vector<std::size_t> iteration_order(const DatasetHandle& handle, std::uint64_t seed);

// Decodes every image with the handle's transforms applied.
LabeledDataset load_images(const DatasetHandle& handle);

Image to_grayscale(const Image& image);
Image resize_bilinear(const Image& image, int height, int width);
Image apply_transforms(const TransformChain& t, Image image);

// Writes `dataset` as root/<split>/<class>/<file> using each item's id
// (which is "<class>/<file>").
void write_image_folder(const LabeledDataset& dataset, const std::filesystem::path& root,
                        Split split);

std::string corpus_checksum(const DatasetHandle& handle);

// Procedural 10-class 32x32 corpus used for desk-scale experiments: each
// class is a shape family drawn with random color, scale, position and
// rotation over a noisy gradient background with small clutter shapes.
struct DeskCorpusOptions {
  int classes = 10;
  int train_per_class = 500;
  int test_per_class = 100;
  int size = 32;
  double noise = 0.15;
  int clutter = 3;
  std::uint64_t seed = 1;
};

std::vector<std::string> desk_class_names(int classes);
LabeledDataset generate_desk_split(const DeskCorpusOptions& options, Split split);
void generate_desk_corpus(const std::filesystem::path& root, const DeskCorpusOptions& options);

}  // namespace slens
