// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "anchorflow/camera.hpp"
#include "anchorflow/geometry.hpp"
#include "oracles.hpp"

using namespace anchorflow;

namespace {

Intrinsics test_k() {
  Intrinsics k;
  k.fx = k.fy = 1000.0;
  k.cx = k.cy = 500.0;
  k.width = 1000.0;
  k.height = 1000.0;
  return k;
}

std::array<double, 6> extract_channels(const CameraPose& pose) {
  const Eigen::Matrix3d c = pose.rotation.transpose();  // camera-to-world
  const double pitch = std::asin(-c(1, 2));
  const double yaw = std::atan2(c(0, 2), c(2, 2));
  const double roll = std::atan2(c(1, 0), c(1, 1));
  const Eigen::Vector3d center = -pose.rotation.transpose() * pose.translation;
  return {yaw, pitch, roll, center.x(), center.y(), center.z()};
}

}  // namespace

TEST_CASE("project basics") {
  const Intrinsics k = test_k();
  CHECK((project(k, {0, 0, 2}) - Eigen::Vector2d(500, 500)).norm() == 0.0);
  CHECK((project(k, {0.5, 0, 2}) - Eigen::Vector2d(750, 500)).norm() < 1e-12);
  CHECK_THROWS_AS(project(k, {0, 0, -1}), std::invalid_argument);
  CHECK_THROWS_AS(project(k, {0, 0, 0}), std::invalid_argument);
}

TEST_CASE("project / pixel_to_ray round trip") {
  const Intrinsics k = test_k();
  Rng rng(41);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d x(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 5.0));
    const Eigen::Vector3d ray = pixel_to_ray(k, project(k, x));
    CHECK(std::abs(ray.norm() - 1.0) < 1e-12);
    // Scaling the ray back to the point's depth recovers the point.
    CHECK((ray * (x.z() / ray.z()) - x).norm() < 1e-9);
    // And the ray is parallel to the point.
    CHECK(ray.cross(x.normalized()).norm() < 1e-9);
    CHECK(std::acos(std::min(1.0, ray.dot(x.normalized()))) < 1e-7);
  }
  CHECK((pixel_to_ray(k, {k.cx, k.cy}) - Eigen::Vector3d(0, 0, 1)).norm() == 0.0);
}

TEST_CASE("sinusoidal_embed layout and zero input") {
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
  const Eigen::VectorXd e = sinusoidal_embed(zero, 4);
  CHECK(e.size() == 2 * 3 * 4);
  for (int i = 0; i < e.size(); i += 2) {
    CHECK(e(i) == 0.0);
    CHECK(e(i + 1) == 1.0);
  }
  CHECK_THROWS_AS(sinusoidal_embed(zero, 0), std::invalid_argument);
}

TEST_CASE("sinusoidal_embed period two under the 2^k pi convention") {
  Rng rng(42);
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd x(2);
    x << rng.uniform(-3, 3), rng.uniform(-3, 3);
    const Eigen::VectorXd a = sinusoidal_embed(x, 4);
    const Eigen::VectorXd b = sinusoidal_embed(x + Eigen::VectorXd::Constant(2, 2.0), 4);
    // Every frequency is an integer multiple of pi, so a shift by 2 is a full
    // period for all of them.
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-11);
  }
}

TEST_CASE("ray_embedding carries a unit ray and the confidence scalar") {
  const Intrinsics k = test_k();
  const Eigen::VectorXd vis = ray_embedding(k, {700, 300}, 1.0);
  CHECK(vis.size() == ray_embedding_dim());
  CHECK(std::abs(vis.head<3>().norm() - 1.0) < 1e-9);
  CHECK(vis(vis.size() - 1) == 1.0);
  const Eigen::VectorXd hidden = ray_embedding(k, {700, 300}, 0.0);
  CHECK(hidden.head(hidden.size() - 1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(hidden(hidden.size() - 1) == 0.0);
}

TEST_CASE("sample_trajectory degenerate bounds give identity poses") {
  TrajectoryBounds bounds;  // all zero
  Rng rng(43);
  const auto poses = sample_trajectory(rng, 5, bounds);
  CHECK(poses.size() == 5);
  for (const auto& p : poses) {
    CHECK((p.rotation - Eigen::Matrix3d::Identity()).norm() == 0.0);
    CHECK(p.translation.norm() == 0.0);
  }
  CHECK_THROWS_AS(sample_trajectory(rng, 1, bounds), std::invalid_argument);
  TrajectoryBounds bad = bounds;
  bad.range[2] = {0.5, -0.5};
  CHECK_THROWS_AS(sample_trajectory(rng, 5, bad), std::invalid_argument);
}

TEST_CASE("sample_trajectory endpoints stay within bounds over 1000 seeds") {
  TrajectoryBounds bounds;
  bounds.range = {{{-0.4, 0.3}, {-0.2, 0.25}, {-0.1, 0.1}, {-1, 2}, {-0.5, 0.5}, {1, 3}}};
  for (int seed = 0; seed < 1000; ++seed) {
    Rng rng(seed);
    const auto poses = sample_trajectory(rng, 7, bounds);
    for (const auto* pose : {&poses.front(), &poses.back()}) {
      const auto ch = extract_channels(*pose);
      for (int c = 0; c < 6; ++c) {
        CHECK(ch[c] >= bounds.range[c][0] - 1e-9);
        CHECK(ch[c] <= bounds.range[c][1] + 1e-9);
      }
    }
  }
}

TEST_CASE("sample_trajectory is deterministic per seed") {
  TrajectoryBounds bounds;
  bounds.range = {{{-0.4, 0.3}, {-0.2, 0.25}, {-0.1, 0.1}, {-1, 2}, {-0.5, 0.5}, {1, 3}}};
  Rng a(99), b(99);
  const auto pa = sample_trajectory(a, 12, bounds);
  const auto pb = sample_trajectory(b, 12, bounds);
  for (size_t t = 0; t < pa.size(); ++t) {
    CHECK((pa[t].rotation - pb[t].rotation).norm() == 0.0);
    CHECK((pa[t].translation - pb[t].translation).norm() == 0.0);
  }
}

TEST_CASE("trajectory smoothness under cosine easing") {
  TrajectoryBounds bounds;
  bounds.range = {{{-0.4, 0.3}, {-0.2, 0.25}, {-0.1, 0.1}, {-1, 2}, {-0.5, 0.5}, {1, 3}}};
  const int n = 40;
  for (int seed = 0; seed < 50; ++seed) {
    Rng rng(seed * 7 + 1);
    const auto poses = sample_trajectory(rng, n, bounds);
    std::array<double, 6> prev = extract_channels(poses[0]);
    for (int t = 1; t < n; ++t) {
      const auto cur = extract_channels(poses[t]);
      for (int c = 0; c < 6; ++c) {
        const double range = bounds.range[c][1] - bounds.range[c][0];
        CHECK(std::abs(cur[c] - prev[c]) <= range * M_PI_2 / (n - 1) + 1e-9);
      }
      prev = cur;
    }
  }
}

TEST_CASE("relative_camera_features basics") {
  // Static camera.
  std::vector<CameraPose> fixed(6, camera_pose_from_channels({0.3, -0.1, 0.05, 1, 2, 3}));
  const Eigen::MatrixXd silent = relative_camera_features(fixed);
  CHECK(silent.cwiseAbs().maxCoeff() == 0.0);

  // Pure yaw stepping; the first frame stays zero by convention.
  std::vector<CameraPose> yawing;
  for (int t = 0; t < 5; ++t) yawing.push_back(camera_pose_from_channels({0.1 * t, 0, 0, 0, 0, 0}));
  const Eigen::MatrixXd f = relative_camera_features(yawing);
  CHECK(f.row(0).cwiseAbs().maxCoeff() == 0.0);
  for (int t = 1; t < 5; ++t) {
    // World-to-camera composition puts the relative yaw at -0.1 about y.
    CHECK(f(t, 0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(f(t, 1) == doctest::Approx(-0.1).epsilon(1e-9));
    CHECK(f(t, 2) == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("relative_camera_features against a compose-and-log oracle") {
  Rng rng(44);
  std::vector<CameraPose> poses;
  for (int t = 0; t < 8; ++t) {
    poses.push_back(camera_pose_from_channels({rng.uniform(-0.5, 0.5), rng.uniform(-0.3, 0.3),
                                               rng.uniform(-0.2, 0.2), rng.uniform(-1, 1),
                                               rng.uniform(-1, 1), rng.uniform(-1, 1)}));
  }
  const Eigen::MatrixXd f = relative_camera_features(poses);
  for (size_t t = 1; t < poses.size(); ++t) {
    const Eigen::Matrix3d rel = poses[t].rotation * poses[t - 1].rotation.transpose();
    const Eigen::Vector3d expect_aa = oracles::quaternion_log(rel);
    CHECK((f.row(t).head<3>().transpose() - expect_aa).norm() < 1e-9);
    const Eigen::Vector3d expect_d =
        rel.transpose() * poses[t].translation - poses[t - 1].translation;
    CHECK((f.row(t).tail<3>().transpose() - expect_d).norm() < 1e-12);
  }
}
