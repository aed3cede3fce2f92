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

#include <map>

#include "slens/rng.hpp"

using namespace slens;

TEST_CASE("rng streams are reproducible and independent") {
  RngStream a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next();
    CHECK(va == b.next());
    (void)c.next();
  }
  CHECK(a.draw_count() == 100);
  CHECK(derive_seed(7, "img/0001.png") != derive_seed(7, "img/0002.png"));
  CHECK(derive_seed(7, "img/0001.png") == derive_seed(7, "img/0001.png"));
  CHECK(derive_seed(7, std::uint64_t{0}) != derive_seed(7, std::uint64_t{1}));
}

TEST_CASE("uniform_int covers its inclusive range evenly") {
  RngStream rng(1);
  std::map<std::int64_t, int> counts;
  const int n = 60000;
  for (int i = 0; i < n; ++i) ++counts[rng.uniform_int(-2, 3)];
  REQUIRE(counts.size() == 6);
  CHECK(counts.begin()->first == -2);
  CHECK(counts.rbegin()->first == 3);
  // 6 cells of expected 10000, sd ~91; 6 sd is far outside chance.
  for (const auto& [v, k] : counts) CHECK(std::abs(k - n / 6) < 550);
}

TEST_CASE("uniform lies in [0, 1)") {
  RngStream rng(9);
  double lo = 1, hi = 0, sum = 0;
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(sum / 20000 == doctest::Approx(0.5).epsilon(0.02));
}
