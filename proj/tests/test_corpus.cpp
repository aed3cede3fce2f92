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

#include <doctest.h>

#include <fstream>
#include <set>

#include "slens/corpus.hpp"
#include "slens/errors.hpp"
#include "slens/png_io.hpp"
#include "test_util.hpp"

using namespace slens;
using slens::testing::random_image;
using slens::testing::TempDir;
namespace fs = std::filesystem;

namespace {

Image quantized(Image img) {
  for (float& v : img.data) v = quantize8(v);
  return img;
}

void write_folder(const fs::path& root, int classes, int per_class, int side = 8) {
  for (const char* split : {"train", "test"})
    for (int k = 0; k < classes; ++k)
      for (int i = 0; i < per_class; ++i)
        write_png(root / split / ("k" + std::to_string(k)) / (std::to_string(i) + ".png"),
                  random_image(3, side, side, static_cast<std::uint32_t>(k * 100 + i)));
}

}  // namespace

TEST_CASE("png round trip is exact for 8-bit values") {
  TempDir tmp;
  const Image rgb = quantized(random_image(3, 5, 7, 1));
  write_png(tmp.path() / "a.png", rgb);
  CHECK(read_png(tmp.path() / "a.png") == rgb);
  const Image gray = quantized(random_image(1, 4, 4, 2));
  write_png(tmp.path() / "g.png", gray);
  CHECK(read_png(tmp.path() / "g.png") == gray);
  const PngInfo info = read_png_info(tmp.path() / "a.png");
  CHECK(info.width == 7);
  CHECK(info.height == 5);
  CHECK(info.channels == 3);
  CHECK_THROWS_AS(read_png(tmp.path() / "missing.png"), IoError);
}

TEST_CASE("load_dataset on an image folder") {
  TempDir tmp;
  write_folder(tmp.path(), 2, 10);
  const DatasetHandle h = load_dataset(tmp.path(), Split::train);
  CHECK(h.count() == 20);
  CHECK(h.class_names == std::vector<std::string>{"k0", "k1"});
  CHECK(h.height == 8);
  CHECK(h.channels == 3);
  CHECK(h.source == "image_folder");

  const LabeledDataset d = load_images(h);
  CHECK(d.items.size() == 20);
  CHECK(d.items[0].id == "k0/0.png");
  CHECK(d.items[19].label == 1);

  SUBCASE("iteration order is seed-determined") {
    CHECK(iteration_order(h, 5) == iteration_order(h, 5));
    CHECK(iteration_order(h, 5) != iteration_order(h, 6));
  }
  SUBCASE("grayscale transform yields one channel") {
    TransformChain t;
    t.grayscale = true;
    const DatasetHandle g = load_dataset(tmp.path(), Split::train, t);
    CHECK(g.channels == 1);
    const LabeledDataset gd = load_images(g);
    const Image& c = d.items[3].image;
    CHECK(gd.items[3].image.at(0, 2, 2) ==
          doctest::Approx(0.299 * c.at(0, 2, 2) + 0.587 * c.at(1, 2, 2) + 0.114 * c.at(2, 2, 2)));
  }
  SUBCASE("class selection relabels") {
    const DatasetHandle s = select_classes(h, {"k1"});
    CHECK(s.count() == 10);
    CHECK(s.images.front().label == 0);
    CHECK_THROWS_AS(select_classes(h, {"nope"}), ConfigError);
  }
}

TEST_CASE("load_dataset errors") {
  TempDir tmp;
  CHECK_THROWS_AS(load_dataset(tmp.path() / "absent", Split::train), IoError);
  write_folder(tmp.path(), 2, 3);
  fs::create_directories(tmp.path() / "train" / "zempty");
  try {
    load_dataset(tmp.path(), Split::train);
    FAIL("expected an error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("zempty") != std::string::npos);
  }
  fs::remove(tmp.path() / "train" / "zempty");
  write_png(tmp.path() / "train" / "k0" / "big.png", random_image(3, 12, 12, 3));
  CHECK_THROWS_AS(load_dataset(tmp.path(), Split::train), IoError);
  TransformChain t;
  t.resize = std::make_pair(8, 8);
  const DatasetHandle h = load_dataset(tmp.path(), Split::train, t);
  for (const auto& it : load_images(h).items) CHECK(it.image.height == 8);
}

TEST_CASE("subset") {
  TempDir tmp;
  write_folder(tmp.path(), 3, 12, 4);
  const DatasetHandle h = load_dataset(tmp.path(), Split::train);
  CHECK(subset(h, 12, 1).images == h.images);
  const DatasetHandle a = subset(h, 5, 7), b = subset(h, 5, 7), c = subset(h, 5, 8);
  CHECK(a.images == b.images);
  CHECK(a.images != c.images);
  std::vector<int> per(3, 0);
  for (const auto& r : a.images) ++per[static_cast<std::size_t>(r.label)];
  CHECK(per == std::vector<int>{5, 5, 5});
  CHECK_THROWS_AS(subset(h, 13, 1), ConfigError);
}

TEST_CASE("packed binary archive loader") {
  TempDir tmp;
  {
    std::ofstream meta(tmp.path() / "batches.meta.txt");
    meta << "zero\none\ntwo\n\n";
    std::ofstream f(tmp.path() / "test_batch.bin", std::ios::binary);
    for (int r = 0; r < 6; ++r) {
      f.put(static_cast<char>(r % 3));
      for (int i = 0; i < 3072; ++i) f.put(static_cast<char>((i + r) % 256));
    }
  }
  const DatasetHandle h = load_dataset(tmp.path(), Split::test);
  CHECK(h.source == "cifar10_binary");
  CHECK(h.count() == 6);
  CHECK(h.class_names == std::vector<std::string>{"zero", "one", "two"});
  const LabeledDataset d = load_images(h);
  CHECK(d.items[4].label == 1);
  CHECK(d.items[4].image.at(0, 0, 0) == doctest::Approx(4.0 / 255.0));
  CHECK(d.items[4].image.at(2, 31, 31) == doctest::Approx(((3071 + 4) % 256) / 255.0));
  CHECK_THROWS_AS(load_dataset(tmp.path(), Split::train), IoError);
}

TEST_CASE("desk corpus") {
  DeskCorpusOptions o;
  o.train_per_class = 6;
  o.test_per_class = 3;
  const LabeledDataset train = generate_desk_split(o, Split::train);
  const LabeledDataset test = generate_desk_split(o, Split::test);
  CHECK(train.items.size() == 60);
  CHECK(test.items.size() == 30);
  CHECK(train.items[0].image.channels == 3);
  CHECK(train.items[0].image.height == 32);
  // Splits draw from different streams: no image appears in both.
  std::set<std::vector<float>> seen;
  for (const auto& it : train.items) seen.insert(it.image.data);
  for (const auto& it : test.items) CHECK(seen.count(it.image.data) == 0);
  // Deterministic.
  CHECK(generate_desk_split(o, Split::test).items[7].image == test.items[7].image);

  TempDir tmp;
  generate_desk_corpus(tmp.path(), o);
  const DatasetHandle h = load_dataset(tmp.path(), Split::test);
  CHECK(h.count() == 30);
  const LabeledDataset back = load_images(h);
  // Generator output is already 8-bit, so the PNG copy is exact.
  for (std::size_t i = 0; i < back.items.size(); ++i) {
    CHECK(back.items[i].id == test.items[i].id);
    CHECK(back.items[i].image == test.items[i].image);
  }
  const DatasetHandle tr = load_dataset(tmp.path(), Split::train);
  std::set<fs::path> train_files;
  for (const auto& r : tr.images) train_files.insert(r.file);
  for (const auto& r : h.images) CHECK(train_files.count(r.file) == 0);
  CHECK(corpus_checksum(h) == corpus_checksum(load_dataset(tmp.path(), Split::test)));
  CHECK(corpus_checksum(h) != corpus_checksum(tr));
}
