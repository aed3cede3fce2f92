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

#include "slens/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "slens/errors.hpp"
#include "slens/png_io.hpp"
#include "slens/rng.hpp"

namespace fs = std::filesystem;

namespace slens {

std::string to_string(Split split) { return split == Split::train ? "train" : "test"; }

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "test") return Split::test;
  throw ConfigError("split", "expected 'train' or 'test', got '" + name + "'");
}

std::string TransformChain::describe() const {
  std::string out;
  if (grayscale) out += "grayscale";
  if (resize) {
    if (!out.empty()) out += ",";
    out += "resize(" + std::to_string(resize->first) + "x" + std::to_string(resize->second) + ")";
  }
  return out.empty() ? "identity" : out;
}

// ---- image folder ----

DatasetHandle ImageFolderSource::open(const fs::path& root, Split split) const {
  const fs::path dir = root / to_string(split);
  if (!fs::is_directory(dir)) throw IoError(dir.string(), "no such split directory");
  DatasetHandle h;
  h.root = root;
  h.split = split;
  h.source = "image_folder";
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) class_dirs.push_back(e.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw IoError(dir.string(), "no class folders");
  for (std::size_t k = 0; k < class_dirs.size(); ++k) {
    const std::string name = class_dirs[k].filename().string();
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(class_dirs[k])) {
      if (!e.is_regular_file()) continue;
      std::string ext = e.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
      if (ext == ".png") files.push_back(e.path());
    }
    if (files.empty()) throw IoError(class_dirs[k].string(), "class folder contains no PNG images");
    std::sort(files.begin(), files.end());
    h.class_names.push_back(name);
    for (const auto& f : files)
      h.images.push_back({name + "/" + f.filename().string(), static_cast<int>(k), f, -1});
  }
  return h;
}

Image ImageFolderSource::read(const DatasetHandle&, const ImageRef& ref) const {
  return read_png(ref.file);
}

// ---- packed binary archive ----

namespace {
constexpr int kCifarSide = 32;
constexpr std::int64_t kCifarRecord = 1 + 3 * kCifarSide * kCifarSide;

std::vector<std::string> cifar_class_names(const fs::path& root) {
  std::vector<std::string> names;
  std::ifstream in(root / "batches.meta.txt");
  std::string line;
  while (in && std::getline(in, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    if (!line.empty()) names.push_back(line);
  }
  if (names.empty())
    for (int k = 0; k < 10; ++k) names.push_back("class" + std::to_string(k));
  return names;
}
}  // namespace

bool Cifar10BinarySource::recognizes(const fs::path& root) {
  return fs::exists(root / "data_batch_1.bin") || fs::exists(root / "test_batch.bin");
}

DatasetHandle Cifar10BinarySource::open(const fs::path& root, Split split) const {
  DatasetHandle h;
  h.root = root;
  h.split = split;
  h.source = "cifar10_binary";
  h.class_names = cifar_class_names(root);
  std::vector<fs::path> files;
  if (split == Split::train) {
    for (int b = 1; b <= 5; ++b)
      if (fs::exists(root / ("data_batch_" + std::to_string(b) + ".bin")))
        files.push_back(root / ("data_batch_" + std::to_string(b) + ".bin"));
  } else if (fs::exists(root / "test_batch.bin")) {
    files.push_back(root / "test_batch.bin");
  }
  if (files.empty()) throw IoError(root.string(), "no " + to_string(split) + " batches");
  std::vector<std::size_t> per_class(h.class_names.size(), 0);
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw IoError(f.string(), "cannot open");
    const auto size = static_cast<std::int64_t>(fs::file_size(f));
    if (size % kCifarRecord != 0) throw IoError(f.string(), "truncated record");
    for (std::int64_t r = 0; r < size / kCifarRecord; ++r) {
      in.seekg(r * kCifarRecord);
      const int label = in.get();
      if (label < 0 || label >= static_cast<int>(h.class_names.size()))
        throw IoError(f.string(), "label out of range in record " + std::to_string(r));
      std::ostringstream id;
      id << h.class_names[label] << "/" << f.stem().string() << "_" << std::setw(5)
         << std::setfill('0') << r << ".png";
      h.images.push_back({id.str(), label, f, r});
      ++per_class[label];
    }
  }
  for (std::size_t k = 0; k < per_class.size(); ++k)
    if (per_class[k] == 0) throw IoError(root.string(), "class '" + h.class_names[k] + "' has no images");
  return h;
}

Image Cifar10BinarySource::read(const DatasetHandle&, const ImageRef& ref) const {
  std::ifstream in(ref.file, std::ios::binary);
  if (!in) throw IoError(ref.file.string(), "cannot open");
  in.seekg(ref.record * kCifarRecord + 1);
  std::vector<unsigned char> buf(kCifarRecord - 1);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw IoError(ref.file.string(), "short read at record " + std::to_string(ref.record));
  Image img(3, kCifarSide, kCifarSide);
  for (std::size_t i = 0; i < buf.size(); ++i) img.data[i] = static_cast<float>(buf[i]) / 255.0f;
  return img;
}

const DatasetSource& source_for(const DatasetHandle& handle) {
  static const ImageFolderSource folder;
  static const Cifar10BinarySource cifar;
  if (handle.source == "cifar10_binary") return cifar;
  return folder;
}

DatasetHandle load_dataset(const fs::path& path, Split split, const TransformChain& transforms) {
  if (!fs::exists(path)) throw IoError(path.string(), "dataset path does not exist");
  DatasetHandle h = Cifar10BinarySource::recognizes(path) ? Cifar10BinarySource().open(path, split)
                                                          : ImageFolderSource().open(path, split);
  h.transforms = transforms;
  int height = 0, width = 0, channels = 0;
  if (h.source == "cifar10_binary") {
    height = width = kCifarSide;
    channels = 3;
  } else {
    for (const auto& ref : h.images) {
      const PngInfo info = read_png_info(ref.file);
      const int c = (info.channels == 2 || info.channels == 4) ? info.channels - 1 : info.channels;
      if (height == 0) {
        height = info.height;
        width = info.width;
        channels = c;
        continue;
      }
      if (c != channels && !transforms.grayscale)
        throw IoError(ref.file.string(), "channel count differs from the first image");
      if ((info.height != height || info.width != width) && !transforms.resize)
        throw IoError(ref.file.string(), "image size " + std::to_string(info.width) + "x" +
                                             std::to_string(info.height) + " differs from " +
                                             std::to_string(width) + "x" + std::to_string(height) +
                                             " and no resize transform is set");
    }
  }
  if (transforms.resize) {
    height = transforms.resize->first;
    width = transforms.resize->second;
  }
  h.height = height;
  h.width = width;
  h.channels = transforms.grayscale ? 1 : channels;
  return h;
}

DatasetHandle select_classes(const DatasetHandle& handle, const std::vector<std::string>& names) {
  DatasetHandle out = handle;
  out.class_names = names;
  out.images.clear();
  std::map<int, int> relabel;
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto it = std::find(handle.class_names.begin(), handle.class_names.end(), names[k]);
    if (it == handle.class_names.end()) throw ConfigError("classes", "unknown class '" + names[k] + "'");
    relabel[static_cast<int>(it - handle.class_names.begin())] = static_cast<int>(k);
  }
  for (const auto& ref : handle.images) {
    const auto it = relabel.find(ref.label);
    if (it == relabel.end()) continue;
    ImageRef r = ref;
    r.label = it->second;
    out.images.push_back(std::move(r));
  }
  return out;
}

namespace {
void shuffle(std::vector<std::size_t>& v, RngStream& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(v[i - 1], v[j]);
  }
}
}  // namespace

DatasetHandle subset(const DatasetHandle& handle, int n_per_class, std::uint64_t seed) {
  if (n_per_class < 1) throw ConfigError("n_per_class", "must be >= 1");
  std::vector<std::vector<std::size_t>> by_class(handle.class_names.size());
  for (std::size_t i = 0; i < handle.images.size(); ++i)
    by_class.at(static_cast<std::size_t>(handle.images[i].label)).push_back(i);
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    auto& idx = by_class[k];
    if (static_cast<int>(idx.size()) < n_per_class)
      throw ConfigError("n_per_class", "class '" + handle.class_names[k] + "' has only " +
                                           std::to_string(idx.size()) + " images, " +
                                           std::to_string(n_per_class) + " requested");
    RngStream rng(derive_seed(seed, handle.class_names[k]));
    shuffle(idx, rng);
    keep.insert(keep.end(), idx.begin(), idx.begin() + n_per_class);
  }
  std::sort(keep.begin(), keep.end());
  DatasetHandle out = handle;
  out.images.clear();
  for (std::size_t i : keep) out.images.push_back(handle.images[i]);
  return out;
}

std::vector<std::size_t> iteration_order(const DatasetHandle& handle, std::uint64_t seed) {
  std::vector<std::size_t> order(handle.images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  RngStream rng(derive_seed(seed, "iteration_order"));
  shuffle(order, rng);
  return order;
}

Image to_grayscale(const Image& image) {
  if (image.channels == 1) return image;
  if (image.channels < 3) throw ContractError("grayscale needs 1 or 3 channels");
  Image out(1, image.height, image.width);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      out.at(0, y, x) = luma601(image.at(0, y, x), image.at(1, y, x), image.at(2, y, x));
  return out;
}

Image resize_bilinear(const Image& image, int height, int width) {
  if (height == image.height && width == image.width) return image;
  Image out(image.channels, height, width);
  const double sy = static_cast<double>(image.height) / height;
  const double sx = static_cast<double>(image.width) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < image.channels; ++c) {
        const double top = image.at(c, y0, x0) * (1 - wx) + image.at(c, y0, x1) * wx;
        const double bot = image.at(c, y1, x0) * (1 - wx) + image.at(c, y1, x1) * wx;
        out.at(c, y, x) = static_cast<float>(top * (1 - wy) + bot * wy);
      }
    }
  }
  return out;
}

Image apply_transforms(const TransformChain& t, Image image) {
  if (t.grayscale) image = to_grayscale(image);
  if (t.resize) image = resize_bilinear(image, t.resize->first, t.resize->second);
  return image;
}

LabeledDataset load_images(const DatasetHandle& handle) {
  const DatasetSource& src = source_for(handle);
  LabeledDataset out;
  out.class_names = handle.class_names;
  out.items.reserve(handle.images.size());
  for (const auto& ref : handle.images) {
    Image img = apply_transforms(handle.transforms, src.read(handle, ref));
    if (img.channels != handle.channels) {
      if (img.channels == 1 && handle.channels == 3) {
        Image rgb(3, img.height, img.width);
        for (int c = 0; c < 3; ++c)
          std::copy(img.data.begin(), img.data.end(), rgb.data.begin() + c * img.plane_size());
        img = std::move(rgb);
      } else {
        throw IoError(ref.file.string(), "unexpected channel count");
      }
    }
    out.items.push_back({ref.id, ref.label, std::move(img)});
  }
  return out;
}

void write_image_folder(const LabeledDataset& dataset, const fs::path& root, Split split) {
  for (const auto& item : dataset.items) write_png(root / to_string(split) / item.id, item.image);
}

std::string corpus_checksum(const DatasetHandle& handle) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](const char* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(p[i]);
      h *= 0x100000001b3ULL;
    }
  };
  std::set<fs::path> files;
  for (const auto& ref : handle.images) {
    mix(ref.id.data(), ref.id.size());
    files.insert(ref.file);
  }
  std::vector<char> buf(1 << 16);
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    while (in) {
      in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      mix(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
  }
  std::ostringstream out;
  out << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

// ---- procedural desk corpus ----

namespace {

Rgb hsv(double h, double s, double v) {
  const double hh = std::fmod(h, 1.0) * 6.0;
  const int i = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  const double rgb[6][3] = {{v, t, p}, {q, v, p}, {p, v, t}, {p, q, v}, {t, p, v}, {v, p, q}};
  return {static_cast<float>(rgb[i][0]), static_cast<float>(rgb[i][1]), static_cast<float>(rgb[i][2])};
}

// Membership test of shape family `kind` centered at (cx, cy) with size r,
// rotated by `angle`, evaluated at pixel center (px, py).
bool in_shape(int kind, double cx, double cy, double r, double angle, double px, double py) {
  const double dx = px - cx, dy = py - cy;
  const double c = std::cos(angle), s = std::sin(angle);
  const double u = c * dx + s * dy, v = -s * dx + c * dy;
  const double au = std::abs(u), av = std::abs(v);
  switch (kind) {
    case 0: return dx * dx + dy * dy <= r * r;                          // circle
    case 1: return au <= 0.85 * r && av <= 0.85 * r;                    // square
    case 2: return v <= 0.7 * r && v >= -0.9 * r + 1.8 * au;            // triangle
    case 3: {                                                           // ring
      const double d = std::sqrt(dx * dx + dy * dy);
      return d <= r && d >= 0.55 * r;
    }
    case 4: return (au <= 0.3 * r && av <= r) || (av <= 0.3 * r && au <= r);  // plus
    case 5: return au + av <= r;                                        // diamond
    case 6: return au <= r && av <= r && static_cast<long>(std::floor((v + r) / (0.5 * r))) % 2 == 0;
    case 7: return au <= r && av <= r && static_cast<long>(std::floor((u + r) / (0.5 * r))) % 2 == 0;
    case 8: return au <= 0.9 * r && av <= 0.9 * r && !(au <= 0.5 * r && av <= 0.5 * r);  // frame
    default: return au <= r && av <= 0.35 * r;                         // bar
  }
}

constexpr int kShapeFamilies = 10;

void draw_shape(Image& img, int kind, double cx, double cy, double r, double angle, const Rgb& color) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      if (in_shape(kind, cx, cy, r, angle, x + 0.5, y + 0.5))
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = color[static_cast<std::size_t>(c)];
}

Image desk_image(const DeskCorpusOptions& o, int label, RngStream& rng) {
  const int n = o.size;
  const double scale = n / 32.0;
  Image img(3, n, n);
  const Rgb c0 = hsv(rng.uniform(), rng.uniform(0.2, 0.8), rng.uniform(0.3, 0.8));
  const Rgb c1 = hsv(rng.uniform(), rng.uniform(0.2, 0.8), rng.uniform(0.3, 0.8));
  const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double t = ((x + 0.5) * std::cos(a) + (y + 0.5) * std::sin(a)) / n;
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = static_cast<float>(c0[static_cast<std::size_t>(c)] * (1 - t) +
                                             c1[static_cast<std::size_t>(c)] * t);
    }
  for (int k = 0; k < o.clutter; ++k) {
    const int kind = static_cast<int>(rng.uniform_int(0, kShapeFamilies - 1));
    const double cx = rng.uniform(0, n), cy = rng.uniform(0, n);
    const double r = rng.uniform(2, 4) * scale;
    const double ang = rng.uniform(0, std::numbers::pi);
    draw_shape(img, kind, cx, cy, r, ang, hsv(rng.uniform(), rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0)));
  }
  const double r = rng.uniform(7, 12) * scale;
  const double cx = rng.uniform(11, 21) * scale, cy = rng.uniform(11, 21) * scale;
  const double ang = rng.uniform(-0.35, 0.35);
  draw_shape(img, label % kShapeFamilies, cx, cy, r, ang,
             hsv(rng.uniform(), rng.uniform(0.3, 1.0), rng.uniform(0.3, 1.0)));
  for (float& v : img.data) v = quantize8(static_cast<float>(v + o.noise * rng.normal()));
  return img;
}

}  // namespace

std::vector<std::string> desk_class_names(int classes) {
  // Index prefix keeps folder (lexicographic) order equal to label order.
  static const char* names[kShapeFamilies] = {"0_circle",  "1_square",   "2_triangle", "3_ring",
                                              "4_plus",    "5_diamond",  "6_hstripes", "7_vstripes",
                                              "8_frame",   "9_bar"};
  if (classes < 2 || classes > kShapeFamilies)
    throw ConfigError("classes", "desk corpus supports 2 to 10 classes");
  std::vector<std::string> out;
  for (int k = 0; k < classes; ++k) out.emplace_back(names[k]);
  return out;
}

LabeledDataset generate_desk_split(const DeskCorpusOptions& o, Split split) {
  LabeledDataset out;
  out.class_names = desk_class_names(o.classes);
  const int per_class = split == Split::train ? o.train_per_class : o.test_per_class;
  const std::uint64_t split_seed = derive_seed(o.seed, to_string(split));
  for (int k = 0; k < o.classes; ++k) {
    for (int i = 0; i < per_class; ++i) {
      std::ostringstream id;
      id << out.class_names[static_cast<std::size_t>(k)] << "/" << std::setw(5) << std::setfill('0') << i << ".png";
      RngStream rng(derive_seed(split_seed, id.str()));
      out.items.push_back({id.str(), k, desk_image(o, k, rng)});
    }
  }
  return out;
}

void generate_desk_corpus(const fs::path& root, const DeskCorpusOptions& o) {
  write_image_folder(generate_desk_split(o, Split::train), root, Split::train);
  write_image_folder(generate_desk_split(o, Split::test), root, Split::test);
}

}  // namespace slens
