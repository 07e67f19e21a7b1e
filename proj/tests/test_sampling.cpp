// SPDX-License-Identifier: Apache-2.0

#include "opo/sampling.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>

using namespace opo;

namespace {

RolloutBatch batch_with_rewards(std::vector<double> rewards) {
  RolloutBatch b;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    b.outcome_ids.push_back(i);
    b.behavior_probs.push_back(0.5);
  }
  b.rewards = std::move(rewards);
  return b;
}

}  // namespace

TEST_CASE("group-normalized advantages") {
  const auto a = group_normalized_advantage(batch_with_rewards({1, 0, 1, 1})).a;
  CHECK(a == std::vector<double>{0.25, -0.75, 0.25, 0.25});
  const auto tied = group_normalized_advantage(batch_with_rewards({0.4, 0.4, 0.4})).a;
  for (double x : tied) CHECK(x == 0.0);
  CHECK(group_normalized_advantage(batch_with_rewards({2, -2})).a == std::vector<double>{2, -2});

  CHECK_THROWS_AS(group_normalized_advantage(RolloutBatch{}), std::invalid_argument);
  RolloutBatch ragged = batch_with_rewards({1, 0});
  ragged.rewards.push_back(1.0);
  CHECK_THROWS_AS(group_normalized_advantage(ragged), std::invalid_argument);
}

TEST_CASE("advantage scaling and clipping are opt-in") {
  const RolloutBatch b = batch_with_rewards({1, 0, 1, 1});
  AdvantageOptions scaled;
  scaled.scale_by_std = true;
  const auto s = group_normalized_advantage(b, scaled).a;
  const double sd = std::sqrt((3 * 0.0625 + 0.5625) / 4.0);
  CHECK(s[1] == doctest::Approx(-0.75 / sd));
  const auto tied = group_normalized_advantage(batch_with_rewards({1, 1}), scaled).a;
  CHECK(tied[0] == 0.0);

  AdvantageOptions clipped;
  clipped.clip = 0.5;
  CHECK(group_normalized_advantage(b, clipped).a[1] == -0.5);
  clipped.clip = 0.0;
  CHECK_THROWS_AS(group_normalized_advantage(b, clipped), std::invalid_argument);
}

TEST_CASE("property: advantages sum to zero") {
  oracle::Gen gen(41);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> r(gen.index(1, 32));
    for (auto& x : r) x = gen.uniform();
    const auto a = group_normalized_advantage(batch_with_rewards(r)).a;
    REQUIRE(std::abs(std::accumulate(a.begin(), a.end(), 0.0)) <= 1e-12);
  }
}

TEST_CASE("alpha weights") {
  const AdvantageField adv{{0.5, -0.2}};
  const RatioField ratios{{0.2, -0.5}};
  CHECK(alpha_weights(adv, ratios, 0.0).omega == adv.a);
  CHECK(alpha_weights(AdvantageField{{0.5}}, RatioField{{0.2}}, 1.0).omega[0] == doctest::Approx(0.6).epsilon(1e-15));
  // On-policy anchor start: t = 1 leaves A untouched.
  const AdvantageField any{{0.37, -1.3, 0.0}};
  CHECK(alpha_weights(any, RatioField{{0.0, 0.0, 0.0}}, 0.6).omega == any.a);

  CHECK_THROWS_AS(alpha_weights(adv, RatioField{{-1.0, 0.0}}, 0.5), std::domain_error);
  CHECK(alpha_weights(adv, RatioField{{-1.0, 0.0}}, 2.0).omega[0] == 0.0);
  CHECK_THROWS_AS(alpha_weights(adv, RatioField{{0.0}}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(alpha_weights(adv, ratios, NAN), std::invalid_argument);
}

TEST_CASE("property: alpha weights are continuous in alpha") {
  oracle::Gen gen(42);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = gen.index(1, 8);
    const AdvantageField adv{gen.normals(n)};
    RatioField ratios{std::vector<double>(n)};
    for (auto& v : ratios.v) v = gen.uniform(-0.9, 3.0);
    const double alpha = gen.uniform(-1.0, 2.0);
    const auto w0 = alpha_weights(adv, ratios, alpha).omega;
    const auto w1 = alpha_weights(adv, ratios, alpha + 1e-9).omega;
    for (std::size_t i = 0; i < n; ++i) REQUIRE(std::abs(w0[i] - w1[i]) < 1e-7);
    const auto near_zero = alpha_weights(adv, ratios, 1e-12).omega;
    for (std::size_t i = 0; i < n; ++i) REQUIRE(near_zero[i] == doctest::Approx(adv.a[i]).epsilon(1e-10));
  }
}

TEST_CASE("gather and aggregate") {
  const RatioField field{{0.1, 0.2, 0.3}};
  const std::vector<std::size_t> ids = {2, 0, 2};
  CHECK(gather(field, ids).v == std::vector<double>{0.3, 0.1, 0.3});
  CHECK_THROWS_AS(gather(field, std::vector<std::size_t>{3}), std::out_of_range);

  const std::vector<double> w = {1.0, 2.0, 4.0};
  CHECK(aggregate_weights(w, ids, 4).omega == std::vector<double>{2.0, 0.0, 5.0, 0.0});
  CHECK_THROWS_AS(aggregate_weights(w, ids, 2), std::out_of_range);
  CHECK_THROWS_AS(aggregate_weights(std::vector<double>{1.0}, ids, 4), std::invalid_argument);
}

TEST_CASE("weight diagnostics") {
  const auto zero = weight_diagnostics(WeightField{{0.0, 0.0}});
  CHECK(zero.min == 0.0);
  CHECK(zero.max == 0.0);
  CHECK(zero.mean == 0.0);
  CHECK(zero.l2_norm == 0.0);

  const auto s = weight_diagnostics(WeightField{{0.3, -0.1}});
  CHECK(s.min == -0.1);
  CHECK(s.max == 0.3);
  CHECK(s.mean == doctest::Approx(0.1));
  CHECK(s.l2_norm == doctest::Approx(std::sqrt(0.1)));

  const auto c = weight_diagnostics(WeightField{{0.7, 0.7}});
  CHECK(c.min == 0.7);
  CHECK(c.max == 0.7);
  CHECK(c.mean == doctest::Approx(0.7));
}
