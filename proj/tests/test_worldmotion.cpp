// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include <Eigen/Dense>

#include "anchorflow/geometry.hpp"
#include "anchorflow/rng.hpp"
#include "anchorflow/worldmotion.hpp"

using namespace anchorflow;

namespace {

WorldTrajectory random_trajectory(Rng& rng, int frames) {
  WorldTrajectory traj;
  traj.fps = 30.0;
  Eigen::Vector3d tau(rng.uniform(-1, 1), rng.uniform(0.5, 1.5), rng.uniform(-1, 1));
  double yaw = rng.uniform(-1.5, 1.5);
  for (int t = 0; t < frames; ++t) {
    yaw += rng.uniform(-0.05, 0.05);
    Eigen::Vector3d aa(0.2 * rng.normal(), yaw, 0.2 * rng.normal());
    if (aa.norm() > M_PI - 0.2) aa *= (M_PI - 0.2) / aa.norm();
    traj.gamma_w.push_back(aa);
    traj.tau_w.push_back(tau);
    tau += Eigen::Vector3d(0.03 * rng.normal(), 0.01 * rng.normal(), 0.03 * rng.normal());
  }
  return traj;
}

}  // namespace

TEST_CASE("gravity frame is a proper rotation whose up axis opposes gravity") {
  const GravityFrame f = GravityFrame::from_gravity(
      kDefaultGravity, axis_angle_to_matrix(Eigen::Vector3d(0.1, 0.7, -0.2)));
  CHECK((f.world_to_gv * f.world_to_gv.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-12);
  CHECK(f.world_to_gv.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.up_axis().dot(kDefaultGravity) == doctest::Approx(-kDefaultGravity.norm()).epsilon(1e-9));
  CHECK_THROWS_AS(GravityFrame::from_gravity(Eigen::Vector3d::Zero(), Eigen::Matrix3d::Identity()),
                  std::invalid_argument);
}

TEST_CASE("canonical frame for default gravity is the identity") {
  const GravityFrame f = GravityFrame::canonical(kDefaultGravity);
  CHECK((f.world_to_gv - Eigen::Matrix3d::Identity()).norm() < 1e-15);
}

TEST_CASE("encode_gv of a static trajectory has zero root velocity") {
  WorldTrajectory traj;
  traj.gamma_w.assign(10, Eigen::Vector3d(0.1, 0.4, 0.0));
  traj.tau_w.assign(10, Eigen::Vector3d(1, 2, 3));
  const GvEncoding enc = encode_gv(traj, kDefaultGravity);
  for (const auto& v : enc.v_root) CHECK(v.norm() == 0.0);
}

TEST_CASE("encode_gv rigid transport of a straight walk") {
  WorldTrajectory traj;
  for (int t = 0; t < 12; ++t) {
    traj.gamma_w.push_back(Eigen::Vector3d::Zero());
    traj.tau_w.push_back(Eigen::Vector3d(0.1 * t, 0, 0));
  }
  const GvEncoding enc = encode_gv(traj, kDefaultGravity);
  for (const auto& v : enc.v_root) {
    CHECK((v - Eigen::Vector3d(0.1, 0, 0)).norm() < 1e-12);  // identity orientation
  }
  CHECK_THROWS_AS(encode_gv(traj, Eigen::Vector3d::Zero()), std::invalid_argument);
}

TEST_CASE("recover_world of zero velocity stays at tau0") {
  const std::vector<Eigen::Vector3d> gamma(8, Eigen::Vector3d(0, 0.5, 0));
  const std::vector<Eigen::Vector3d> v(8, Eigen::Vector3d::Zero());
  const WorldTrajectory traj =
      recover_world(gamma, v, GravityFrame::canonical(kDefaultGravity), {1, 2, 3}, 30.0);
  for (const auto& tau : traj.tau_w) CHECK((tau - Eigen::Vector3d(1, 2, 3)).norm() == 0.0);
}

TEST_CASE("recover_world linear rollout under identity orientation") {
  const std::vector<Eigen::Vector3d> gamma(9, Eigen::Vector3d::Zero());
  const std::vector<Eigen::Vector3d> v(9, Eigen::Vector3d(0, 0, 0.1));
  const GravityFrame f = GravityFrame::canonical(kDefaultGravity);
  const WorldTrajectory traj = recover_world(gamma, v, f, Eigen::Vector3d::Zero(), 30.0);
  for (int t = 0; t < 9; ++t) {
    const Eigen::Vector3d expect = t * (f.world_to_gv.transpose() * Eigen::Vector3d(0, 0, 0.1));
    CHECK((traj.tau_w[t] - expect).norm() < 1e-12);
  }
  CHECK_THROWS_AS(
      recover_world(gamma, std::vector<Eigen::Vector3d>(4, Eigen::Vector3d::Zero()), f,
                    Eigen::Vector3d::Zero(), 30.0),
      std::invalid_argument);
}

TEST_CASE("encode/recover round trip over 1000 random trajectories") {
  for (int seed = 0; seed < 1000; ++seed) {
    Rng rng(seed + 1);
    const WorldTrajectory traj = random_trajectory(rng, 120);
    const GvEncoding enc = encode_gv(traj, kDefaultGravity);
    const WorldTrajectory back =
        recover_world(enc.gamma_gv, enc.v_root, enc.frame, traj.tau_w[0], traj.fps);
    for (int t = 0; t < 120; ++t) {
      CHECK((back.tau_w[t] - traj.tau_w[t]).norm() < 1e-6);
      const Eigen::Matrix3d ra = axis_angle_to_matrix(back.gamma_w[t]);
      const Eigen::Matrix3d rb = axis_angle_to_matrix(traj.gamma_w[t]);
      CHECK((ra - rb).norm() < 1e-7);
    }
  }
}

TEST_CASE("root velocities are invariant to a shared rotation of gravity and trajectory") {
  Rng rng(77);
  const WorldTrajectory traj = random_trajectory(rng, 40);
  const Eigen::Matrix3d q = axis_angle_to_matrix(Eigen::Vector3d(0.4, -0.3, 0.9));
  WorldTrajectory rotated;
  rotated.fps = traj.fps;
  for (size_t t = 0; t < traj.gamma_w.size(); ++t) {
    rotated.gamma_w.push_back(
        matrix_to_axis_angle(q * axis_angle_to_matrix(traj.gamma_w[t])));
    rotated.tau_w.push_back(q * traj.tau_w[t]);
  }
  const GvEncoding a = encode_gv(traj, kDefaultGravity);
  const GvEncoding b = encode_gv(rotated, q * kDefaultGravity);
  for (size_t t = 0; t < a.v_root.size(); ++t) {
    CHECK((a.v_root[t] - b.v_root[t]).norm() < 1e-10);
  }
}

TEST_CASE("a constant velocity bias accumulates linearly in the horizon") {
  const int frames = 50;
  const std::vector<Eigen::Vector3d> gamma(frames, Eigen::Vector3d::Zero());
  std::vector<Eigen::Vector3d> v(frames, Eigen::Vector3d(0.05, 0, 0));
  std::vector<Eigen::Vector3d> biased = v;
  const Eigen::Vector3d bias(0.01, 0, 0.002);
  for (auto& b : biased) b += bias;
  const GravityFrame f = GravityFrame::canonical(kDefaultGravity);
  const WorldTrajectory clean = recover_world(gamma, v, f, Eigen::Vector3d::Zero(), 30.0);
  const WorldTrajectory drift = recover_world(gamma, biased, f, Eigen::Vector3d::Zero(), 30.0);
  for (int t = 0; t < frames; ++t) {
    CHECK((drift.tau_w[t] - clean.tau_w[t] - t * bias).norm() < 1e-12);
  }
}
