// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "anchorflow/latent.hpp"
#include "anchorflow/geometry.hpp"

using namespace anchorflow;

namespace {

MotionSequence random_states(Rng& rng, int frames) {
  MotionSequence seq(frames);
  Vec10 beta;
  for (int i = 0; i < kShapeDims; ++i) beta(i) = rng.uniform(-1.0, 1.0);
  Eigen::Vector3d tau_w(0, 0.9, 0);
  double yaw = rng.uniform(-1.0, 1.0);
  for (int t = 0; t < frames; ++t) {
    MotionState& s = seq[t];
    for (int j = 0; j < kNumBodyJoints; ++j) {
      s.body_pose.row(j) << 0.4 * rng.normal(), 0.4 * rng.normal(), 0.4 * rng.normal();
    }
    s.beta = beta;
    s.gamma_c = Eigen::Vector3d(0.3 * rng.normal(), 0.3 * rng.normal(), 0.3 * rng.normal());
    s.tau_c = Eigen::Vector3d(0.2 * rng.normal(), 0.2 * rng.normal(), 3.0 + 0.3 * rng.normal());
    yaw += rng.uniform(-0.03, 0.03);
    s.gamma_w = Eigen::Vector3d(0, yaw, 0);
    s.tau_w = tau_w;
    tau_w += Eigen::Vector3d(0.02 * rng.normal(), 0.002 * rng.normal(), 0.02 * rng.normal());
  }
  return seq;
}

}  // namespace

TEST_CASE("latent layout blocks are contiguous and cover the frame") {
  const LatentLayout& l = LatentLayout::standard();
  CHECK(l.frame_width() == kFrameWidth);
  int offset = 0;
  for (int b = 0; b < kNumBlocks; ++b) {
    CHECK(l.spans[b].offset == offset);
    CHECK(l.spans[b].width > 0);
    offset += l.spans[b].width;
  }
  CHECK(offset == 148);
  CHECK(l.span(Block::ThetaTorso).width == 24);
  CHECK(l.span(Block::ThetaNon).width == 39);
  CHECK(l.span(Block::JTorso).width == 24);
  CHECK(l.span(Block::JNon).width == 39);
  CHECK(l.span(Block::Beta).width == 10);
}

TEST_CASE("known mask is zero on anchored blocks and one on generated ones") {
  const LatentLayout& l = LatentLayout::standard();
  const KnownMask m = KnownMask::standard(l);
  CHECK(m.mask.size() == 148);
  CHECK(m.generated_count() == 84);
  for (Block b : {Block::ThetaTorso, Block::JTorso, Block::Beta, Block::GammaC, Block::TauC}) {
    const auto& s = l.span(b);
    CHECK(m.mask.segment(s.offset, s.width).cwiseAbs().maxCoeff() == 0.0);
  }
  for (Block b : {Block::ThetaNon, Block::JNon, Block::GammaGv, Block::VRoot}) {
    const auto& s = l.span(b);
    CHECK(m.mask.segment(s.offset, s.width).minCoeff() == 1.0);
  }
}

TEST_CASE("noise spec defaults and validation") {
  NoiseSpec spec;
  const Eigen::VectorXd sigma = spec.per_coordinate(LatentLayout::standard());
  const LatentLayout& l = LatentLayout::standard();
  CHECK(sigma(l.span(Block::ThetaTorso).offset) == 1.0);
  CHECK(sigma(l.span(Block::JTorso).offset) == 0.5);
  CHECK(sigma(l.span(Block::JNon).offset + 5) == 0.5);
  CHECK(sigma(l.span(Block::VRoot).offset) == 1.0);
  spec.sigma[0] = 0.0;
  CHECK_THROWS_AS(spec.per_coordinate(l), std::invalid_argument);
}

TEST_CASE("build_latent on a rest-pose frame") {
  MotionSequence seq(1);
  seq[0].tau_c = Eigen::Vector3d::Zero();
  const CompositeLatent z =
      build_latent(seq, Partition::standard(), Skeleton::standard(), kDefaultGravity, 30.0);
  CHECK(z.data.rows() == 1);
  CHECK(z.data.cols() == 148);
  const LatentLayout& l = LatentLayout::standard();
  CHECK(z.data.row(0).segment(l.span(Block::ThetaTorso).offset, 24).cwiseAbs().maxCoeff() == 0.0);
  CHECK(z.data.row(0).segment(l.span(Block::ThetaNon).offset, 39).cwiseAbs().maxCoeff() == 0.0);
  const auto rest = Skeleton::standard().rest_joints(BodyShape{});
  const Partition& part = Partition::standard();
  for (int i = 0; i < kNumTorso; ++i) {
    const Eigen::Vector3d j =
        z.data.row(0).segment<3>(l.span(Block::JTorso).offset + 3 * i).transpose();
    CHECK((j - rest[part.torso_ids[i]]).norm() == 0.0);
  }
  CHECK_THROWS_AS(
      build_latent(MotionSequence{}, Partition::standard(), Skeleton::standard(), kDefaultGravity,
                   30.0),
      std::invalid_argument);
}

TEST_CASE("build/decode round trip on the housed fields") {
  Rng rng(55);
  const MotionSequence seq = random_states(rng, 40);
  const Skeleton& skel = Skeleton::standard();
  const Partition& part = Partition::standard();
  const CompositeLatent z = build_latent(seq, part, skel, kDefaultGravity, 30.0);

  WorldTrajectory traj;
  for (const auto& s : seq) {
    traj.gamma_w.push_back(s.gamma_w);
    traj.tau_w.push_back(s.tau_w);
  }
  const GravityFrame frame = encode_gv(traj, kDefaultGravity).frame;
  const DecodedLatent dec = decode_latent(z, part, frame, seq[0].tau_w, 30.0);

  for (int t = 0; t < 40; ++t) {
    CHECK((dec.states[t].body_pose - seq[t].body_pose).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((dec.states[t].beta - seq[t].beta).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((dec.states[t].gamma_c - seq[t].gamma_c).norm() < 1e-9);
    CHECK((dec.states[t].tau_c - seq[t].tau_c).norm() < 1e-9);
    CHECK((dec.states[t].tau_w - seq[t].tau_w).norm() < 1e-7);
    const Eigen::Matrix3d ra = axis_angle_to_matrix(dec.states[t].gamma_w);
    const Eigen::Matrix3d rb = axis_angle_to_matrix(seq[t].gamma_w);
    CHECK((ra - rb).norm() < 1e-7);
  }
}

TEST_CASE("decode of the zero latent is the identity state") {
  CompositeLatent z;
  z.data = Eigen::MatrixXd::Zero(5, 148);
  const DecodedLatent dec = decode_latent(z, Partition::standard(),
                                          GravityFrame::canonical(kDefaultGravity),
                                          Eigen::Vector3d::Zero(), 30.0);
  for (const auto& s : dec.states) {
    CHECK(s.body_pose.cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.beta.cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.gamma_c.norm() == 0.0);
    CHECK(s.tau_c.norm() == 0.0);
    CHECK(s.tau_w.norm() == 0.0);
  }
}

TEST_CASE("decode pools a constant shape block back to the constant") {
  Rng rng(56);
  CompositeLatent z;
  z.data = Eigen::MatrixXd::Zero(17, 148);
  Vec10 b;
  for (int i = 0; i < kShapeDims; ++i) b(i) = rng.uniform(-2, 2);
  const auto& span = LatentLayout::standard().span(Block::Beta);
  for (int t = 0; t < 17; ++t) z.data.row(t).segment(span.offset, kShapeDims) = b.transpose();
  const DecodedLatent dec = decode_latent(z, Partition::standard(),
                                          GravityFrame::canonical(kDefaultGravity),
                                          Eigen::Vector3d::Zero(), 30.0);
  CHECK((dec.states[0].beta - b).cwiseAbs().maxCoeff() < 1e-12);

  z.data(3, 10) = std::nan("");
  CHECK_THROWS_AS(decode_latent(z, Partition::standard(),
                                GravityFrame::canonical(kDefaultGravity), Eigen::Vector3d::Zero(),
                                30.0),
                  std::invalid_argument);
}

TEST_CASE("source noise respects the per-block scale and the seed") {
  const LatentLayout& l = LatentLayout::standard();
  Rng rng(57);
  const int frames = 1600;  // ~1e5 draws per group
  const Eigen::MatrixXd eps = sample_source_noise(rng, frames, NoiseSpec{}, l);

  const auto block_std = [&](Block b) {
    const auto& s = l.span(b);
    const Eigen::MatrixXd m = eps.middleCols(s.offset, s.width);
    return std::sqrt(m.array().square().mean());
  };
  const double j_std =
      std::sqrt((eps.middleCols(l.span(Block::JTorso).offset, 63).array().square()).mean());
  CHECK(j_std > 0.49);
  CHECK(j_std < 0.51);
  for (Block b : {Block::ThetaTorso, Block::ThetaNon, Block::Beta}) {
    CHECK(block_std(b) > 0.99);
    CHECK(block_std(b) < 1.01);
  }

  Rng r1(123), r2(123);
  const Eigen::MatrixXd a = sample_source_noise(r1, 7, NoiseSpec{}, l);
  const Eigen::MatrixXd b2 = sample_source_noise(r2, 7, NoiseSpec{}, l);
  CHECK((a - b2).cwiseAbs().maxCoeff() == 0.0);
}
