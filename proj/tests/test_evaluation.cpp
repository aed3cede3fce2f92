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

#include "doctest_torch.hpp"

#include <nlohmann/json.hpp>

#include "nn_util.hpp"
#include "slens/errors.hpp"
#include "slens/evaluation.hpp"
#include "slens/png_io.hpp"
#include "test_util.hpp"

using namespace slens;
using namespace slens::testing;

namespace {

void constant_head(Classifier& clf, int cls) {
  torch::NoGradGuard g;
  for (auto& p : clf->named_parameters()) {
    if (p.key() == "fc.weight") p.value().zero_();
    if (p.key() == "fc.bias") {
      p.value().zero_();
      p.value()[cls] = 5.0;
    }
  }
}

}  // namespace

TEST_CASE("accuracy of a constant classifier is the class share") {
  auto data = noise_tensors(30, 10, 3, 16, 1);
  torch::manual_seed(1);
  Classifier clf(tiny_classifier(10));
  constant_head(clf, 0);
  CHECK(accuracy(clf, data) == doctest::Approx(0.1));
  auto pc = per_class_accuracy(clf, data);
  CHECK(pc[0] == 1.0);
  CHECK(pc[1] == 0.0);
  CHECK_THROWS_AS(accuracy(clf, noise_tensors(8, 4, 3, 16, 2)), ConfigError);
}

TEST_CASE("accuracy on labels a classifier assigned itself is 1") {
  auto data = noise_tensors(40, 4, 3, 16, 3);
  torch::manual_seed(4);
  Classifier clf(tiny_classifier(4));
  clf->eval();
  {
    torch::NoGradGuard g;
    data.labels = clf->forward(data.images).argmax(1);
  }
  CHECK(accuracy(clf, data) == 1.0);
}

TEST_CASE("confidence interval uses the normal approximation") {
  CHECK(ci95_halfwidth({0.5}) == 0.0);
  // sd of {0.70, 0.72, 0.74} is 0.02.
  CHECK(ci95_halfwidth({0.70, 0.72, 0.74}) == doctest::Approx(1.96 * 0.02 / std::sqrt(3.0)));
  CHECK(mean_of({0.70, 0.72, 0.74}) == doctest::Approx(0.72));
}

TEST_CASE("eval matrix has four cells and CI only for repeated runs") {
  ExperimentData d;
  d.clean_train = noise_tensors(16, 4, 3, 16, 5);
  d.shortcut_train = noise_tensors(16, 4, 3, 16, 6);
  d.clean_test = noise_tensors(8, 4, 3, 16, 7);
  d.shortcut_test = noise_tensors(8, 4, 3, 16, 8);
  ExperimentConfig c;
  c.lens = tiny_lens();
  c.classifier = tiny_classifier(4);
  c.train.epochs = 1;
  c.train.batch_size = 8;
  auto m = eval_matrix(d, c, 1);
  CHECK(m.cells.size() == 4);
  for (const auto& cell : m.cells) {
    CHECK_FALSE(cell.report.ci95_halfwidth.has_value());
    CHECK(cell.report.clean_accuracy >= 0.0);
    CHECK(cell.report.clean_accuracy <= 1.0);
    CHECK(cell.report.shortcut_accuracy.has_value());
    CHECK(cell.report.mean_attention.has_value() == cell.lens);
  }
  CHECK(m.format_table().find("shortcut") != std::string::npos);
  CHECK(to_json(m)["cells"].size() == 4);

  auto r = evaluate_cell(d.clean_train, d.clean_test, TensorDataset{}, c, false, 2);
  CHECK(r.ci95_halfwidth.has_value());
  CHECK(r.run_accuracies.size() == 2);
  CHECK(eval_report_from_json(to_json(r)).run_accuracies == r.run_accuracies);
  CHECK_THROWS_AS(eval_matrix(d, c, 0), ConfigError);
}

TEST_CASE("rho sweep rows and CSV round trip") {
  auto train_set = noise_tensors(16, 4, 3, 16, 9);
  auto test_set = noise_tensors(8, 4, 3, 16, 10);
  ExperimentConfig c;
  c.lens = tiny_lens();
  c.classifier = tiny_classifier(4);
  c.train.epochs = 1;
  c.train.batch_size = 8;
  c.train.deterministic = true;
  auto rows = rho_sweep({0.025}, train_set, test_set, c, 1);
  REQUIRE(rows.size() == 1);
  // Degenerate sweep equals one train + accuracy call with the run seed.
  TrainConfig tc = c.train;
  tc.seed = run_seed(c.train.seed, 0);
  auto single = train(train_set, c.lens, c.classifier, tc);
  CHECK(rows[0].mean == accuracy(single.classifier, test_set));
  CHECK(rows[0].error == 0.0);
  CHECK_THROWS_AS(rho_sweep({1.5}, train_set, test_set, c, 1), ConfigError);

  std::vector<SweepRow> many{{0.005, 0.612345678901234, 0.0123}, {0.1, 1.0 / 3, 0.0},
                             {0.5, 0.2, 1e-17}};
  auto back = sweep_from_csv(sweep_to_csv(many));
  REQUIRE(back.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(back[i].rho == many[i].rho);
    CHECK(back[i].mean == many[i].mean);
    CHECK(back[i].error == many[i].error);
  }
}

TEST_CASE("gradcam contracts") {
  torch::manual_seed(11);
  Classifier clf(tiny_classifier(4));
  auto x = torch::rand({3, 16, 16});
  auto cam = gradcam(clf, x, 1);
  CHECK(cam.height == 16);
  CHECK(cam.width == 16);
  for (float v : cam.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  CHECK(*std::max_element(cam.data.begin(), cam.data.end()) == doctest::Approx(1.0));

  // Scaling the class scores by a positive factor leaves the map unchanged.
  Classifier scaled(tiny_classifier(4));
  {
    torch::NoGradGuard g;
    auto src = clf->named_parameters();
    for (auto& p : scaled->named_parameters()) p.value().copy_(src[p.key()]);
    auto sb = clf->named_buffers();
    for (auto& b : scaled->named_buffers()) b.value().copy_(sb[b.key()]);
    for (auto& p : scaled->named_parameters())
      if (p.key().rfind("fc.", 0) == 0) p.value().mul_(3.0);
  }
  auto cam3 = gradcam(scaled, x, 1);
  // Bilinear upsampling leaves flat maxima, so compare peak values.
  auto at = [](const CamHeatmap& h, std::pair<int, int> yx) {
    return h.data[static_cast<size_t>(yx.first) * h.width + yx.second];
  };
  CHECK(at(cam3, cam.argmax()) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(at(cam, cam3.argmax()) == doctest::Approx(1.0).epsilon(1e-5));
  for (size_t i = 0; i < cam.data.size(); ++i) CHECK(cam3.data[i] == doctest::Approx(cam.data[i]).epsilon(1e-4));

  constant_head(clf, 2);
  auto flat = gradcam(clf, x, 1);
  for (float v : flat.data) CHECK(v == 0.0f);
  CHECK_THROWS_AS(gradcam(clf, x, 4), ConfigError);
  CHECK_THROWS_AS(gradcam(clf, x, -1), ConfigError);
}

TEST_CASE("lens visualization grid") {
  torch::manual_seed(12);
  Lens lens(tiny_lens(), 3);
  {
    torch::NoGradGuard g;
    auto out = lens->attention()->named_parameters();
    out["out.weight"].zero_();
    out["out.bias"].fill_(-1e4);
  }
  auto x = torch::rand({5, 3, 16, 16});
  Image grid = visualize_lens(lens, x);
  CHECK(grid.channels == 3);
  CHECK(grid.height == 4 * 16);
  CHECK(grid.width == 5 * 16);
  // A = 0: the difference and attention rows are black.
  for (int c = 0; c < 3; ++c)
    for (int y = 32; y < 64; ++y)
      for (int xx = 0; xx < 80; ++xx) CHECK(grid.at(c, y, xx) == 0.0f);

  // Difference row recomputed from the saved rows, within 8-bit rounding.
  Lens active(tiny_lens(), 3);
  TempDir dir("vis");
  write_png(dir.path() / "grid.png", visualize_lens(active, x));
  Image back = read_png(dir.path() / "grid.png");
  double worst = 0;
  for (int col = 0; col < 5; ++col) {
    double peak = 0;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 16; ++y)
        for (int xx = col * 16; xx < col * 16 + 16; ++xx)
          peak = std::max<double>(peak, std::abs(back.at(c, y, xx) - back.at(c, 16 + y, xx)));
    REQUIRE(peak > 0);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 16; ++y)
        for (int xx = col * 16; xx < col * 16 + 16; ++xx) {
          // Each saved row carries up to half a level of rounding.
          double d = std::abs(back.at(c, y, xx) - back.at(c, 16 + y, xx)) / peak;
          double tol = (2.0 / 255) / peak + 1.0 / 255;
          worst = std::max(worst, std::abs(d - back.at(c, 32 + y, xx)) / tol);
        }
  }
  CHECK(worst <= 1.0);
}

TEST_CASE("localization metrics") {
  auto images = torch::zeros({2, 3, 4, 4});
  auto lensed = images.clone();
  lensed[0][0][1][1] = 0.6;  // inside
  lensed[1][2][3][3] = 0.2;  // outside
  auto masks = torch::zeros({2, 4, 4});
  masks[0][1][1] = 1;
  masks[1][0][0] = 1;
  CHECK(difference_mass_inside(images, lensed, masks) == doctest::Approx(0.75));
  CHECK(difference_mass_inside(images, images, masks) == 0.0);

  auto cams = torch::zeros({2, 4, 4});
  cams[0][1][1] = 1;
  cams[1][2][2] = 1;
  CHECK(argmax_inside_rate(cams, masks) == doctest::Approx(0.5));
}

TEST_CASE("footprint masks follow the manifest") {
  LabeledDataset d;
  d.class_names = {"a", "b"};
  for (int i = 0; i < 6; ++i)
    d.items.push_back({"i" + std::to_string(i), i % 2, random_image(3, 16, 16, i)});
  ShortcutSpec spec;
  spec.kind = ShortcutKind::location_dot;
  spec.num_classes = 2;
  spec.radius = 2;
  spec.anchor_map = {{4, 4}, {11, 11}};
  spec.apply_probability = 0.5;
  spec.seed = 3;
  auto sd = build_shortcut_dataset(d, spec);
  std::vector<std::string> ids;
  for (const auto& it : d.items) ids.push_back(it.id);
  auto masks = footprint_masks(sd.manifest, ids);
  for (size_t i = 0; i < ids.size(); ++i) {
    const auto* rec = sd.manifest.find(ids[i]);
    double area = masks[i].sum().item<double>();
    if (rec->applied) {
      CHECK(area == 13.0);
      auto [ax, ay] = spec.anchor_map[rec->label];
      CHECK(masks[i][ay][ax].item<float>() == 1.0f);
    } else {
      CHECK(area == 0.0);
    }
  }
  CHECK_THROWS_AS(footprint_masks(sd.manifest, {"nope"}), ContractError);
}
