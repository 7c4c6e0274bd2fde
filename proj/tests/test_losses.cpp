// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "anchorflow/losses.hpp"
#include "anchorflow/worldmotion.hpp"

using namespace anchorflow;

namespace {

MotionSequence walking_gt(Rng& rng, int frames) {
  MotionSequence seq(frames);
  Vec10 beta;
  for (int i = 0; i < kShapeDims; ++i) beta(i) = rng.uniform(-1.0, 1.0);
  for (int t = 0; t < frames; ++t) {
    MotionState& s = seq[t];
    for (int j = 0; j < kNumBodyJoints; ++j) {
      s.body_pose.row(j) << 0.3 * rng.normal(), 0.3 * rng.normal(), 0.3 * rng.normal();
    }
    s.beta = beta;
    s.gamma_c = Eigen::Vector3d(0.2 * rng.normal(), 0.2 * rng.normal(), 0.2 * rng.normal());
    s.tau_c = Eigen::Vector3d(0.1 * rng.normal(), 0.1 * rng.normal(), 3.5);
    s.gamma_w = Eigen::Vector3d(0, 0.01 * t, 0);
    s.tau_w = Eigen::Vector3d(0.03 * t, 0.9, 0.02 * t);
  }
  return seq;
}

SequenceContext make_ctx(const ProxyMesh* mesh) {
  return SequenceContext{&Skeleton::standard(), &Partition::standard(), mesh, Intrinsics{}};
}

}  // namespace

TEST_CASE("robust_penalty value and continuity at the switch") {
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  CHECK(robust_penalty(zero, 0.05) == 0.0);

  const double delta = 0.05;
  Eigen::VectorXd at(1);
  at << delta;
  CHECK(robust_penalty(at, delta) == doctest::Approx(delta / 2).epsilon(1e-15));
  at << delta * (1 + 1e-9);
  CHECK(robust_penalty(at, delta) == doctest::Approx(delta / 2).epsilon(1e-6));
}

TEST_CASE("robust_penalty gradient matches central differences") {
  Rng rng(81);
  const double delta = 0.05;
  const double h = 1e-8;
  for (double scale : {0.1 * delta, 1.0 * delta, 10.0 * delta}) {
    for (int trial = 0; trial < 30; ++trial) {
      Eigen::VectorXd r(5);
      for (int i = 0; i < 5; ++i) r(i) = rng.normal();
      r *= scale / r.norm();
      const Eigen::VectorXd grad = robust_penalty_grad(r, delta);
      for (int i = 0; i < 5; ++i) {
        Eigen::VectorXd rp = r, rm = r;
        rp(i) += h;
        rm(i) -= h;
        const double fd = (robust_penalty(rp, delta) - robust_penalty(rm, delta)) / (2 * h);
        CHECK(std::abs(fd - grad(i)) <
              1e-6 * std::max(1.0, std::abs(grad(i))) + 1e-7 * (scale == delta));
      }
    }
  }
}

TEST_CASE("joint_bone_consistency basics") {
  Rng rng(82);
  const auto pairs = bone_pairs(Skeleton::standard());
  const int frames = 3;
  std::vector<Eigen::MatrixXd> fk(frames);
  for (auto& f : fk) {
    f.resize(kNumJoints, 3);
    f.setRandom();
  }
  CHECK(joint_bone_consistency(fk, fk, pairs, 0.05) == 0.0);

  // Constant offset: bone differences cancel, only the joint term remains.
  const Eigen::RowVector3d c(0.02, -0.01, 0.015);
  std::vector<Eigen::MatrixXd> shifted = fk;
  for (auto& f : shifted) f.rowwise() += c;
  const double expect = kNumJoints * robust_penalty(c.transpose(), 0.05);
  CHECK(joint_bone_consistency(shifted, fk, pairs, 0.05) ==
        doctest::Approx(expect).epsilon(1e-12));

  // The full loss strictly increases under the shift even though the bone
  // term alone is invariant.
  CHECK(joint_bone_consistency(shifted, fk, pairs, 0.05) >
        joint_bone_consistency(fk, fk, pairs, 0.05));
}

TEST_CASE("joint_bone_consistency against a term-by-term oracle") {
  Rng rng(83);
  const auto pairs = bone_pairs(Skeleton::standard());
  std::vector<Eigen::MatrixXd> fk(2), hat(2);
  for (int t = 0; t < 2; ++t) {
    fk[t].resize(kNumJoints, 3);
    fk[t].setRandom();
    hat[t] = fk[t];
  }
  const int j_perturbed = 18;
  hat[0].row(j_perturbed) += Eigen::RowVector3d(0.07, -0.03, 0.02);

  double expect = 0.0;
  const double delta = 0.05;
  for (int t = 0; t < 2; ++t) {
    for (int j = 0; j < kNumJoints; ++j) {
      expect += robust_penalty((hat[t].row(j) - fk[t].row(j)).transpose(), delta);
    }
    for (const auto& [j, p] : pairs) {
      expect += robust_penalty(
          ((hat[t].row(j) - hat[t].row(p)) - (fk[t].row(j) - fk[t].row(p))).transpose(), delta);
    }
  }
  expect /= 2.0;
  CHECK(joint_bone_consistency(hat, fk, pairs, delta) == doctest::Approx(expect).epsilon(1e-12));

  std::vector<Eigen::MatrixXd> wrong = fk;
  wrong[0].conservativeResize(kNumJoints - 1, 3);
  CHECK_THROWS_AS(joint_bone_consistency(hat, wrong, pairs, delta), std::invalid_argument);
}

TEST_CASE("projection_loss basics and the closed-form pixel case") {
  const Intrinsics k;
  const int frames = 1;
  std::vector<Eigen::MatrixXd> j_cam(frames), u_gt(frames);
  j_cam[0] = Eigen::MatrixXd::Zero(kNumJoints, 3);
  j_cam[0].col(2).setConstant(3.0);
  u_gt[0] = Eigen::MatrixXd::Zero(kNumJoints, 2);
  for (int j = 0; j < kNumJoints; ++j) {
    u_gt[0].row(j) = project(k, j_cam[0].row(j).transpose()).transpose();
  }
  Eigen::MatrixXd visible = Eigen::MatrixXd::Ones(frames, kNumJoints);
  std::vector<int> selected;
  for (int id : Partition::standard().non_torso_ids) selected.push_back(id);

  CHECK(projection_loss(j_cam, u_gt, visible, selected, k, 5.0) == 0.0);

  Eigen::MatrixXd none = Eigen::MatrixXd::Zero(frames, kNumJoints);
  CHECK(projection_loss(j_cam, u_gt, none, selected, k, 5.0) == 0.0);

  // One visible joint, 3 px off, delta 5 px: 0.5 * 9 / 5.
  Eigen::MatrixXd one = none;
  const int jsel = selected[4];
  one(0, jsel) = 1.0;
  std::vector<Eigen::MatrixXd> off = u_gt;
  off[0](jsel, 0) += 3.0;
  CHECK(projection_loss(j_cam, off, one, selected, k, 5.0) ==
        doctest::Approx(0.9).epsilon(1e-12));

  // Behind-camera and torso joints never contribute.
  std::vector<Eigen::MatrixXd> behind = j_cam;
  behind[0](jsel, 2) = -1.0;
  CHECK(projection_loss(behind, off, one, selected, k, 5.0) == 0.0);
  std::vector<Eigen::MatrixXd> torso_moved = j_cam;
  torso_moved[0].row(Partition::standard().torso_ids[0]) += Eigen::RowVector3d(1, 1, 1);
  CHECK(projection_loss(torso_moved, u_gt, visible, selected, k, 5.0) == 0.0);
}

TEST_CASE("projection_weight ramp") {
  CHECK(projection_weight(0, 100, 0.1, 0.5) == 0.0);
  CHECK(projection_weight(50, 100, 0.1, 0.5) == 0.1);
  CHECK(projection_weight(99, 100, 0.1, 0.5) == 0.1);
  CHECK(projection_weight(25, 100, 0.1, 0.5) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK_THROWS_AS(projection_weight(1, 0, 0.1, 0.5), std::invalid_argument);
}

TEST_CASE("regression_losses vanish at the ground truth and report a consistent total") {
  Rng rng(84);
  const MotionSequence gt = walking_gt(rng, 6);
  const ProxyMesh mesh = ProxyMesh::generate(Skeleton::standard(), 32, 5);
  const SequenceContext ctx = make_ctx(&mesh);
  const LossWeights w;
  const LossReport report = regression_losses(gt, gt, ctx, w);
  for (const auto& term : report.terms) CHECK(term.value == 0.0);
  CHECK(report.total == 0.0);

  MotionSequence pred = gt;
  pred[2].body_pose(5, 1) += 0.15;
  const LossReport r2 = regression_losses(pred, gt, ctx, w);
  double total = 0.0;
  for (const auto& term : r2.terms) {
    CHECK(term.value >= 0.0);
    total += term.weight * term.value;
  }
  CHECK(std::abs(total - r2.total) < 1e-9);
}

TEST_CASE("regression_losses isolates translation-dependent terms") {
  Rng rng(85);
  const MotionSequence gt = walking_gt(rng, 5);
  const ProxyMesh mesh = ProxyMesh::generate(Skeleton::standard(), 32, 5);
  const SequenceContext ctx = make_ctx(&mesh);
  MotionSequence pred = gt;
  for (auto& s : pred) s.tau_c += Eigen::Vector3d(0.1, 0, 0);
  const LossReport r = regression_losses(pred, gt, ctx, LossWeights{});
  CHECK(r.value("pose") == 0.0);
  CHECK(r.value("world_transl") == 0.0);
  CHECK(r.value("vertices") == 0.0);  // root-relative, so a shared shift cancels
  CHECK(r.value("transl") > 0.0);
  CHECK(r.value("joints3d") > 0.0);
  CHECK(r.value("kp2d") > 0.0);
}

TEST_CASE("world-translation term matches a direct rollout oracle and grows superlinearly") {
  const GravityFrame frame = GravityFrame::canonical(kDefaultGravity);
  const Eigen::Vector3d bias(0.01, 0, 0);
  const LossWeights w;

  const auto term_for = [&](int frames) {
    std::vector<Eigen::Vector3d> gamma(frames, Eigen::Vector3d::Zero());
    std::vector<Eigen::Vector3d> v(frames, Eigen::Vector3d(0.02, 0, 0));
    std::vector<Eigen::Vector3d> vb = v;
    for (auto& x : vb) x += bias;
    const WorldTrajectory clean = recover_world(gamma, v, frame, Eigen::Vector3d::Zero(), 30.0);
    const WorldTrajectory drift = recover_world(gamma, vb, frame, Eigen::Vector3d::Zero(), 30.0);
    MotionSequence gt(frames), pred(frames);
    for (int t = 0; t < frames; ++t) {
      gt[t].tau_w = clean.tau_w[t];
      pred[t].tau_w = drift.tau_w[t];
      gt[t].tau_c = pred[t].tau_c = Eigen::Vector3d(0, 0, 3);
    }
    const SequenceContext ctx = make_ctx(nullptr);
    const double term = regression_losses(pred, gt, ctx, w).value("world_transl");

    // Direct evaluation of the definition.
    double expect = 0.0;
    for (int t = 0; t < frames; ++t) {
      expect += robust_penalty(Eigen::VectorXd(t * bias), w.delta_3d);
    }
    expect /= frames;
    CHECK(term == doctest::Approx(expect).epsilon(1e-12));
    return term;
  };

  const double t50 = term_for(50);
  const double t100 = term_for(100);
  // The mean error grows with the horizon, so the unaveraged sum is
  // superlinear.
  CHECK(t100 > 2.0 * t50 * 0.9);
  CHECK(100 * t100 > 2.0 * (50 * t50));
}
