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
#include "slens/lens.hpp"
#include "test_util.hpp"

using namespace slens;
using namespace slens::testing;

TEST_CASE("compose identities are bit-exact") {
  torch::manual_seed(1);
  auto I = torch::rand({3, 3, 8, 8});
  auto R = torch::rand({3, 3, 8, 8});
  CHECK(torch::equal(compose(I, torch::zeros({3, 1, 8, 8}), R), I));
  CHECK(torch::equal(compose(I, torch::ones({3, 1, 8, 8}), R), R));
  for (int trial = 0; trial < 20; ++trial) {
    auto i = torch::rand({2, 1 + trial % 3, 5, 7});
    auto r = torch::rand_like(i);
    CHECK(torch::equal(compose(i, torch::zeros({2, 1, 5, 7}), r), i));
    CHECK(torch::equal(compose(i, torch::ones({2, 1, 5, 7}), r), r));
  }
}

TEST_CASE("compose blends elementwise") {
  auto I = torch::full({1, 3, 4, 4}, 0.8);
  auto A = torch::full({1, 1, 4, 4}, 0.25);
  auto R = torch::zeros({1, 3, 4, 4});
  auto out = compose(I, A, R);
  // 0.25 * 0 + 0.75 * 0.8
  CHECK(torch::allclose(out, torch::full_like(out, 0.6), 0, 1e-6));
  CHECK_THROWS_AS(compose(I, torch::zeros({1, 1, 3, 4}), R), ContractError);
  CHECK_THROWS_AS(compose(I, A, torch::zeros({1, 1, 4, 4})), ContractError);
  CHECK_THROWS_AS(compose(I, torch::zeros({1, 2, 4, 4}), R), ContractError);
}

TEST_CASE("reproduction loss values") {
  auto zero = torch::zeros({2, 1, 4, 4});
  CHECK(reproduction_loss(zero, 0.0).item<double>() == 0.0);
  CHECK(reproduction_loss(zero, 0.3).item<double>() == 0.0);
  auto at_rho = torch::full({2, 1, 4, 4}, 0.25, torch::kFloat64);
  CHECK(reproduction_loss(at_rho, 0.25).item<double>() == 0.0);
  auto half = torch::full({1, 1, 8, 8}, 0.5, torch::kFloat64);
  CHECK(reproduction_loss(half, 0.025).item<double>() == doctest::Approx(0.475).epsilon(1e-12));
  CHECK_THROWS_AS(reproduction_loss(half, 1.5), ConfigError);
  CHECK_THROWS_AS(reproduction_loss(half, -0.1), ConfigError);
}

TEST_CASE("reproduction loss is a per-image hinge") {
  // Image 0 mean 0.5, image 1 mean 0: batch loss is (0.475 + 0) / 2.
  auto a = torch::zeros({2, 1, 4, 4}, torch::kFloat64);
  a[0].fill_(0.5);
  CHECK(reproduction_loss(a, 0.025).item<double>() == doctest::Approx(0.2375).epsilon(1e-12));
}

TEST_CASE("reproduction loss hinge property") {
  torch::manual_seed(7);
  for (int trial = 0; trial < 200; ++trial) {
    const double rho = (trial % 10) / 10.0;
    auto a = torch::rand({3, 1, 6, 6}, torch::kFloat64) * torch::rand({3, 1, 1, 1}, torch::kFloat64);
    double loss = reproduction_loss(a, rho).item<double>();
    CHECK(loss >= 0.0);
    bool all_below = (attention_mass(a) <= rho).all().item<bool>();
    CHECK((loss == 0.0) == all_below);
  }
}

TEST_CASE("reproduction loss gradient is 1/(wh) above rho and 0 below") {
  auto a = torch::full({1, 1, 4, 5}, 0.5, torch::kFloat64).requires_grad_();
  reproduction_loss(a, 0.1).backward();
  CHECK(torch::allclose(a.grad(), torch::full_like(a, 1.0 / 20), 0, 1e-15));
  auto b = torch::full({1, 1, 4, 5}, 0.05, torch::kFloat64).requires_grad_();
  reproduction_loss(b, 0.1).backward();
  CHECK(b.grad().abs().max().item<double>() == 0.0);
}

TEST_CASE("compose and reproduction loss match finite differences") {
  torch::manual_seed(3);
  auto I = torch::rand({2, 3, 4, 4}, torch::kFloat64).requires_grad_();
  auto A = torch::rand({2, 1, 4, 4}, torch::kFloat64).requires_grad_();
  auto R = torch::rand({2, 3, 4, 4}, torch::kFloat64).requires_grad_();
  auto W = torch::rand({2, 3, 4, 4}, torch::kFloat64);
  auto f = [&] { return (compose(I, A, R) * W).sum().item<double>(); };
  (compose(I, A, R) * W).sum().backward();
  CHECK(worst_fd_error(f, I, I.grad()) < 1e-3);
  CHECK(worst_fd_error(f, A, A.grad()) < 1e-3);
  CHECK(worst_fd_error(f, R, R.grad()) < 1e-3);

  auto M = (torch::rand({3, 1, 5, 5}, torch::kFloat64) * 0.3).requires_grad_();
  auto g = [&] { return reproduction_loss(M, 0.1).item<double>(); };
  reproduction_loss(M, 0.1).backward();
  // Keep every image away from the hinge kink.
  REQUIRE((attention_mass(M) - 0.1).abs().min().item<double>() > 1e-3);
  CHECK(worst_fd_error(g, M, M.grad(), 30) < 1e-3);
}

TEST_CASE("tiny U-Nets match finite differences at 64-bit") {
  for (auto act : {OutputActivation::unit_interval_squash, OutputActivation::image_range}) {
    torch::manual_seed(11);
    UNetConfig c{2, 2, act == OutputActivation::image_range ? 3 : 1, act, 0.0, true};
    UNet net(c, 3);
    net->to(torch::kFloat64);
    net->eval();
    // Give the normalization layers non-trivial statistics.
    {
      torch::NoGradGuard g;
      for (auto& buf : net->named_buffers())
        if (buf.key().find("running_var") != std::string::npos) buf.value().uniform_(0.5, 2.0);
        else if (buf.key().find("running_mean") != std::string::npos) buf.value().uniform_(-0.2, 0.2);
    }
    auto x = torch::rand({2, 3, 8, 8}, torch::kFloat64);
    auto f = [&] { return net->forward(x).mean().item<double>(); };
    net->zero_grad();
    net->forward(x).mean().backward();
    double worst = 0;
    for (auto& p : net->named_parameters()) {
      if (!p.value().grad().defined()) continue;
      worst = std::max(worst, worst_fd_error(f, p.value(), p.value().grad(), 4));
    }
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("attention network contracts") {
  torch::manual_seed(5);
  UNetConfig c{3, 4, 1, OutputActivation::unit_interval_squash, 0.0, true};
  UNet net(c, 3);
  {
    torch::NoGradGuard g;
    for (auto& p : net->named_parameters())
      if (p.key().rfind("out.", 0) == 0) p.value().zero_();
  }
  auto x = torch::rand({4, 3, 32, 32});
  auto a = net->forward(x);
  CHECK(a.sizes() == torch::IntArrayRef{4, 1, 32, 32});
  CHECK(torch::allclose(a, torch::full_like(a, 0.5), 0, 0));
  // Sides that are not multiples of 2^steps are padded and cropped.
  auto odd = net->forward(torch::rand({2, 3, 30, 27}));
  CHECK(odd.sizes() == torch::IntArrayRef{2, 1, 30, 27});
  CHECK_THROWS_AS(net->forward(torch::rand({2, 1, 32, 32})), ConfigError);
}

TEST_CASE("replacement network preserves shape and range") {
  for (int draw = 0; draw < 10; ++draw) {
    torch::manual_seed(100 + draw);
    UNet net(UNetConfig{5, 2, 3, OutputActivation::image_range, 0.0, true}, 3);
    {
      torch::NoGradGuard g;
      for (auto& p : net->parameters()) p.normal_(0, 3);
    }
    auto x = torch::rand({2, 3, 32, 32}) * 4 - 2;
    auto r = net->forward(x);
    CHECK(r.sizes() == x.sizes());
    CHECK(r.min().item<float>() >= 0.0f);
    CHECK(r.max().item<float>() <= 1.0f);
    UNet att(UNetConfig{3, 2, 1, OutputActivation::unit_interval_squash, 0.0, true}, 3);
    {
      torch::NoGradGuard g;
      for (auto& p : att->parameters()) p.normal_(0, 3);
    }
    auto a = att->forward(x);
    CHECK(a.min().item<float>() >= 0.0f);
    CHECK(a.max().item<float>() <= 1.0f);
  }
}

TEST_CASE("lens config validation and JSON") {
  LensConfig c;
  CHECK_NOTHROW(c.validate(3));
  LensConfig bad = c;
  bad.rho = 1.5;
  try {
    bad.validate(3);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "rho");
  }
  bad = c;
  bad.lambda_repr = -1;
  CHECK_THROWS_AS(bad.validate(3), ConfigError);
  bad = c;
  bad.attention.downsampling_steps = 6;
  CHECK_THROWS_AS(bad.validate(3), ConfigError);
  bad = c;
  bad.attention.downsampling_steps = 0;
  CHECK_THROWS_AS(bad.validate(3), ConfigError);
  CHECK_THROWS_AS(c.validate(1), ConfigError);

  CHECK(lens_config_from_json(to_json(c)) == c);
  LensConfig other = c;
  other.rho = 0.1;
  other.attention.base_channels = 8;
  other.replacement.batch_norm = false;
  CHECK(lens_config_from_json(to_json(other)) == other);
  CHECK_THROWS_AS(lens_config_from_json(nlohmann::json{{"rhoo", 0.1}}), ConfigError);
  CHECK_THROWS_AS(lens_config_from_json(nlohmann::json{{"rho", "x"}}), ConfigError);
}

TEST_CASE("lens checkpoint round trip") {
  TempDir dir("lens");
  torch::manual_seed(2);
  Lens lens(tiny_lens(), 3);
  lens->eval();
  auto x = torch::rand({2, 3, 16, 16});
  auto before = lens->forward(x).image;
  save_lens(lens, dir.path() / "lens.pt");
  CHECK(std::filesystem::exists(dir.path() / "lens.pt.json"));
  Lens back = load_lens(dir.path() / "lens.pt");
  back->eval();
  CHECK(back->config() == lens->config());
  CHECK(torch::equal(back->forward(x).image, before));
  CHECK_THROWS_AS(load_lens(dir.path() / "missing.pt"), IoError);
}
