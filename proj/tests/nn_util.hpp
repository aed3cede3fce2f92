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

#include <cmath>
#include <functional>
#include <vector>

#include <torch/torch.h>

#include "slens/training.hpp"

namespace slens::testing {

// |a - b| <= tol * max(|a|, |b|), with an absolute floor for values that are
// zero to working precision.
inline bool close_rel(double a, double b, double tol, double floor = 1e-10) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b)) + floor;
}

// Central difference of f at element `i` of `t` (modified in place and
// restored).
inline double central_difference(const std::function<double()>& f, torch::Tensor t, int64_t i,
                                 double eps = 1e-6) {
  torch::NoGradGuard guard;
  auto flat = t.view(-1);
  const double v = flat[i].item<double>();
  flat[i] = v + eps;
  const double hi = f();
  flat[i] = v - eps;
  const double lo = f();
  flat[i] = v;
  return (hi - lo) / (2 * eps);
}

// Worst relative mismatch between autodiff gradient `grad` of t and the
// central difference of f at up to `samples` evenly spread entries.
inline double worst_fd_error(const std::function<double()>& f, torch::Tensor t,
                             const torch::Tensor& grad, int samples = 12) {
  const int64_t n = t.numel();
  const int64_t step = std::max<int64_t>(1, n / samples);
  double worst = 0;
  auto g = grad.reshape(-1);
  for (int64_t i = 0; i < n; i += step) {
    const double a = g[i].item<double>();
    const double fd = central_difference(f, t, i);
    const double scale = std::max({std::abs(a), std::abs(fd), 1e-7});
    worst = std::max(worst, std::abs(a - fd) / scale);
  }
  return worst;
}

// Tiny labeled set of (N, C, side, side) uniform noise with balanced labels.
inline TensorDataset noise_tensors(int n, int classes, int channels, int side, uint64_t seed) {
  torch::manual_seed(seed);
  TensorDataset d;
  d.images = torch::rand({n, channels, side, side});
  d.labels = torch::arange(n, torch::kInt64).remainder(classes);
  d.num_classes = classes;
  for (int i = 0; i < n; ++i) d.ids.push_back("img" + std::to_string(i));
  return d;
}

inline ClassifierConfig tiny_classifier(int classes, int channels = 3) {
  ClassifierConfig c;
  c.num_classes = classes;
  c.width = 0.25;
  c.input_channels = channels;
  return c;
}

inline LensConfig tiny_lens(int channels = 3) {
  LensConfig c;
  c.attention = {1, 2, 1, OutputActivation::unit_interval_squash, -1.0, true};
  c.replacement = {2, 2, channels, OutputActivation::image_range, 0.0, true};
  return c;
}

}  // namespace slens::testing
