// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <vector>

#include "splat4d/errors.hpp"
#include "splat4d/losses.hpp"
#include "splat4d/rng.hpp"

using namespace splat4d;

namespace {

Mask all_valid(int h, int w) {
  Mask mask(h, w, 1);
  std::fill(mask.raw().begin(), mask.raw().end(), std::uint8_t{1});
  return mask;
}

}  // namespace

TEST_CASE("depth_loss hand values") {
  SUBCASE("exact match is zero") {
    Image depth(3, 3, 1);
    for (int i = 0; i < 9; ++i) depth.raw()[i] = 1.0 + 0.1 * i;
    CHECK(depth_loss(depth, depth, all_valid(3, 3)).value == 0.0);
  }

  SUBCASE("constant offsets leave the gradient term at zero") {
    Image gt(4, 5, 1);
    Rng rng(2);
    for (double& v : gt.raw()) v = rng.uniform(0.5, 3.0);
    Image pred = gt;
    for (double& v : pred.raw()) v += 0.7;
    CHECK(depth_loss(pred, gt, all_valid(4, 5)).value == doctest::Approx(0.49).epsilon(1e-12));
  }

  SUBCASE("2x1 example combines MSE and the difference term") {
    Image pred(1, 2, 1), gt(1, 2, 1);
    pred.at(0, 0) = 0.0;
    pred.at(0, 1) = 1.0;
    const ImageLoss loss = depth_loss(pred, gt, all_valid(1, 2));
    CHECK(loss.value == doctest::Approx(1.5).epsilon(1e-12));  // 0.5 MSE + 1.0 gradient
  }

  SUBCASE("invalid pixels are excluded on both terms") {
    Image pred(1, 3, 1), gt(1, 3, 1);
    pred.at(0, 0) = 2.0;
    pred.at(0, 1) = 1e9;  // masked out
    pred.at(0, 2) = 2.0;
    gt.at(0, 0) = 2.0;
    gt.at(0, 2) = 2.0;
    Mask valid = all_valid(1, 3);
    valid.at(0, 1) = 0;
    const ImageLoss loss = depth_loss(pred, gt, valid);
    CHECK(loss.value == 0.0);  // no valid pair spans the hole
    CHECK(loss.grad.at(0, 1) == 0.0);
  }

  SUBCASE("an all-false mask throws") {
    Image depth(2, 2, 1);
    CHECK_THROWS_AS(depth_loss(depth, depth, Mask(2, 2, 1)), NoValidPixels);
  }
}

TEST_CASE("render_loss is plain MSE with its gradient") {
  Image gt(3, 4, 3);
  Rng rng(8);
  for (double& v : gt.raw()) v = rng.uniform(0.0, 1.0);

  CHECK(render_loss(gt, gt).value == 0.0);

  Image pred = gt;
  for (double& v : pred.raw()) v += 0.5;
  const ImageLoss loss = render_loss(pred, gt);
  CHECK(loss.value == doctest::Approx(0.25).epsilon(1e-12));
  const double expected = 2.0 * 0.5 / (3 * 4 * 3);
  CHECK(loss.grad.at(1, 2, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("motion_point_loss frozen example") {
  const std::vector<Vec3> pred = {Vec3(1, 0, 0), Vec3(0, 0, 0)};
  const std::vector<Vec3> gt = {Vec3::Zero(), Vec3::Zero()};
  const std::vector<std::uint8_t> valid = {1, 1};

  const PointLoss loss = motion_point_loss(pred, gt, valid);
  CHECK(loss.value == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(loss.grad[0].x() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(loss.grad[1].norm() == 0.0);  // subgradient at zero is zero
}

TEST_CASE("motion_point_loss filters invalid entries") {
  const std::vector<Vec3> pred = {Vec3(1e6, 0, 0), Vec3(0.5, 0, 0)};
  const std::vector<Vec3> gt = {Vec3::Zero(), Vec3(0.5, 0, 0)};
  CHECK(motion_point_loss(pred, gt, {0, 1}).value == 0.0);
  CHECK_THROWS_AS(motion_point_loss(pred, gt, {0, 0}), NoValidPoints);
}

TEST_CASE("motion_distribution_loss frozen example") {
  const std::vector<Vec3> pred = {Vec3(1, 0, 0), Vec3(0, 0, 0)};
  const std::vector<Vec3> gt = {Vec3::Zero(), Vec3::Zero()};
  const PointLoss loss = motion_distribution_loss(pred, gt, {1, 1});
  CHECK(loss.value == doctest::Approx(0.25).epsilon(1e-15));
  CHECK_THROWS_AS(motion_distribution_loss(pred, gt, {0, 0}), NoValidPoints);
}

TEST_CASE("motion_distribution_loss sees only the Gram structure") {
  Rng rng(12);
  std::vector<Vec3> gt;
  for (int i = 0; i < 6; ++i)
    gt.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  const std::vector<std::uint8_t> valid(6, 1);
  const Mat3 rotation =
      Eigen::AngleAxisd(0.9, Vec3(0.3, -0.5, 1.0).normalized()).toRotationMatrix();

  SUBCASE("a common rotation of pred and gt changes nothing") {
    std::vector<Vec3> pred = gt;
    pred[2] += Vec3(0.3, 0, 0);
    const double before = motion_distribution_loss(pred, gt, valid).value;
    std::vector<Vec3> pred_rot, gt_rot;
    for (const Vec3& p : pred) pred_rot.push_back(rotation * p);
    for (const Vec3& p : gt) gt_rot.push_back(rotation * p);
    const double after = motion_distribution_loss(pred_rot, gt_rot, valid).value;
    CHECK(std::abs(before - after) < 1e-6);
  }

  SUBCASE("rotated predictions match the gt Gram matrix") {
    std::vector<Vec3> pred;
    for (const Vec3& p : gt) pred.push_back(rotation * p);
    CHECK(motion_distribution_loss(pred, gt, valid).value < 1e-9);
    CHECK(motion_point_loss(pred, gt, valid).value > 1e-3);  // pointwise still differs
  }
}

TEST_CASE("losses are non-negative") {
  Rng rng(23);
  for (int round = 0; round < 20; ++round) {
    std::vector<Vec3> pred, gt;
    std::vector<std::uint8_t> valid;
    for (int i = 0; i < 5; ++i) {
      pred.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
      gt.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
      valid.push_back(1);
    }
    CHECK(motion_point_loss(pred, gt, valid).value >= 0.0);
    CHECK(motion_distribution_loss(pred, gt, valid).value >= 0.0);
  }
}

TEST_CASE("total_loss arithmetic") {
  LossWeights ones;
  ones.depth = ones.render = ones.motion = ones.point = ones.distribution = 1.0;
  const LossReport report = total_loss(ones, 0.1, 0.2, 0.3, 0.4);
  CHECK(report.total == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(total_loss(ones, 0, 0, 0, 0).total == 0.0);
}

TEST_CASE("total_loss decomposition identity") {
  Rng rng(31);
  for (int round = 0; round < 50; ++round) {
    LossWeights weights;
    weights.depth = rng.uniform(0, 2);
    weights.render = rng.uniform(0, 2);
    weights.motion = rng.uniform(0, 2);
    weights.point = rng.uniform(0, 2);
    weights.distribution = rng.uniform(0, 2);
    const double d = rng.uniform(0, 1), r = rng.uniform(0, 1);
    const double pt = rng.uniform(0, 1), dist = rng.uniform(0, 1);

    const LossReport report = total_loss(weights, d, r, pt, dist);
    const double expected = weights.depth * d + weights.render * r +
                            weights.motion * (weights.point * pt + weights.distribution * dist);
    CHECK(std::abs(report.total - expected) < 1e-9);
    CHECK(report.depth == d);
    CHECK(report.render == r);
    CHECK(report.motion_point == pt);
    CHECK(report.motion_distribution == dist);
  }
}

TEST_CASE("motion weights factor out of the sums") {
  // lambda_pt/lambda_dist multiply linearly, so pre-scaling the term values
  // by the weights and using unit weights lands on the same total.
  LossWeights weights;
  weights.motion = 2.0;
  weights.point = 0.5;
  weights.distribution = 0.25;
  LossWeights unit = weights;
  unit.point = 1.0;
  unit.distribution = 1.0;

  const double pt = 0.311, dist = 0.173;
  const double outside = total_loss(weights, 0, 0, pt, dist).total;
  const double inside = total_loss(unit, 0, 0, 0.5 * pt, 0.25 * dist).total;
  CHECK(std::abs(outside - inside) < 1e-12);
}

TEST_CASE("smoothed history windows") {
  std::vector<double> history;
  for (int i = 0; i < 10; ++i) history.push_back(static_cast<double>(i));
  CHECK(smoothed_head(history, 4) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(smoothed_tail(history, 4) == doctest::Approx(7.5).epsilon(1e-15));
  CHECK(smoothed_head(history, 100) == doctest::Approx(4.5).epsilon(1e-15));
}
