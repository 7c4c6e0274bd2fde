// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include "anchorflow/latent.hpp"

#include <sstream>
#include <stdexcept>

namespace anchorflow {

namespace {

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

LatentLayout make_standard_layout() {
  LatentLayout l;
  const std::array<std::pair<const char*, int>, kNumBlocks> blocks = {{
      {"theta_torso", 3 * kNumTorso},
      {"theta_non", 3 * kNumNonTorso},
      {"j_torso", 3 * kNumTorso},
      {"j_non", 3 * kNumNonTorso},
      {"beta", kShapeDims},
      {"gamma_c", 3},
      {"tau_c", 3},
      {"gamma_gv", 3},
      {"v_root", 3},
  }};
  int offset = 0;
  for (int i = 0; i < kNumBlocks; ++i) {
    l.names[i] = blocks[i].first;
    l.spans[i] = {offset, blocks[i].second};
    offset += blocks[i].second;
  }
  return l;
}

}  // namespace

const LatentLayout& LatentLayout::standard() {
  static const LatentLayout l = make_standard_layout();
  return l;
}

int LatentLayout::frame_width() const {
  const Span& last = spans[kNumBlocks - 1];
  return last.offset + last.width;
}

std::string LatentLayout::content_hash(const Skeleton& skel) const {
  std::ostringstream os;
  for (int i = 0; i < kNumBlocks; ++i) {
    os << names[i] << ":" << spans[i].offset << ":" << spans[i].width << "|";
  }
  for (const auto& n : skel.joint_names) os << n << ",";
  std::ostringstream hex;
  hex << std::hex << fnv1a64(os.str());
  return hex.str();
}

KnownMask KnownMask::standard(const LatentLayout& layout) {
  KnownMask m;
  m.mask = Eigen::VectorXd::Zero(layout.frame_width());
  for (Block b : {Block::ThetaNon, Block::JNon, Block::GammaGv, Block::VRoot}) {
    const auto& s = layout.span(b);
    m.mask.segment(s.offset, s.width).setOnes();
  }
  return m;
}

NoiseSpec::NoiseSpec() {
  sigma.fill(1.0);
  sigma[static_cast<int>(Block::JTorso)] = 0.5;
  sigma[static_cast<int>(Block::JNon)] = 0.5;
}

Eigen::VectorXd NoiseSpec::per_coordinate(const LatentLayout& layout) const {
  for (double s : sigma) {
    if (!(s > 0.0)) throw std::invalid_argument("NoiseSpec: sigma must be positive");
  }
  Eigen::VectorXd out(layout.frame_width());
  for (int i = 0; i < kNumBlocks; ++i) {
    out.segment(layout.spans[i].offset, layout.spans[i].width).setConstant(sigma[i]);
  }
  return out;
}

CompositeLatent build_latent(const MotionSequence& states, const Partition& part,
                             const Skeleton& skel, const Eigen::Vector3d& gravity, double fps) {
  if (states.empty()) throw std::invalid_argument("build_latent: empty sequence");
  const LatentLayout& layout = LatentLayout::standard();
  const int n = static_cast<int>(states.size());

  WorldTrajectory traj;
  traj.fps = fps;
  traj.gamma_w.reserve(n);
  traj.tau_w.reserve(n);
  for (const auto& s : states) {
    traj.gamma_w.push_back(s.gamma_w);
    traj.tau_w.push_back(s.tau_w);
  }
  const GvEncoding enc = encode_gv(traj, gravity);

  CompositeLatent z;
  z.data.resize(n, layout.frame_width());
  for (int t = 0; t < n; ++t) {
    const MotionState& s = states[t];
    const auto joints = forward_kinematics(camera_pose_of(s), BodyShape{s.beta}, skel);
    auto row = z.data.row(t);
    const auto put3 = [&row](int offset, const Eigen::Vector3d& v) {
      row.segment<3>(offset) = v.transpose();
    };
    const auto& tt = layout.span(Block::ThetaTorso);
    const auto& tn = layout.span(Block::ThetaNon);
    const auto& jt = layout.span(Block::JTorso);
    const auto& jn = layout.span(Block::JNon);
    for (int i = 0; i < kNumTorso; ++i) {
      const int j = part.torso_ids[i];
      put3(tt.offset + 3 * i, s.body_pose.row(j - 1).transpose());
      put3(jt.offset + 3 * i, joints[j]);
    }
    for (int i = 0; i < kNumNonTorso; ++i) {
      const int j = part.non_torso_ids[i];
      put3(tn.offset + 3 * i, s.body_pose.row(j - 1).transpose());
      put3(jn.offset + 3 * i, joints[j]);
    }
    row.segment(layout.span(Block::Beta).offset, kShapeDims) = s.beta.transpose();
    put3(layout.span(Block::GammaC).offset, s.gamma_c);
    put3(layout.span(Block::TauC).offset, s.tau_c);
    put3(layout.span(Block::GammaGv).offset, enc.gamma_gv[t]);
    put3(layout.span(Block::VRoot).offset, enc.v_root[t]);
  }
  return z;
}

DecodedLatent decode_latent(const CompositeLatent& z, const Partition& part,
                            const GravityFrame& frame, const Eigen::Vector3d& tau0, double fps) {
  if (!z.data.allFinite()) throw std::invalid_argument("decode_latent: non-finite latent");
  const LatentLayout& layout = LatentLayout::standard();
  if (z.data.cols() != layout.frame_width()) {
    throw std::invalid_argument("decode_latent: unexpected frame width");
  }
  const int n = z.frames();
  DecodedLatent out;
  out.states.resize(n);
  const auto& jt = layout.span(Block::JTorso);
  const auto& jn = layout.span(Block::JNon);
  out.j_torso = z.data.middleCols(jt.offset, jt.width);
  out.j_non = z.data.middleCols(jn.offset, jn.width);

  const Vec10 beta =
      z.data.middleCols(layout.span(Block::Beta).offset, kShapeDims).colwise().mean().transpose();

  std::vector<Eigen::Vector3d> gamma_gv(n), v_root(n);
  for (int t = 0; t < n; ++t) {
    gamma_gv[t] = z.data.row(t).segment<3>(layout.span(Block::GammaGv).offset).transpose();
    v_root[t] = z.data.row(t).segment<3>(layout.span(Block::VRoot).offset).transpose();
  }
  const WorldTrajectory traj = recover_world(gamma_gv, v_root, frame, tau0, fps);

  const auto& tt = layout.span(Block::ThetaTorso);
  const auto& tn = layout.span(Block::ThetaNon);
  for (int t = 0; t < n; ++t) {
    MotionState& s = out.states[t];
    for (int i = 0; i < kNumTorso; ++i) {
      s.body_pose.row(part.torso_ids[i] - 1) = z.data.row(t).segment<3>(tt.offset + 3 * i);
    }
    for (int i = 0; i < kNumNonTorso; ++i) {
      s.body_pose.row(part.non_torso_ids[i] - 1) = z.data.row(t).segment<3>(tn.offset + 3 * i);
    }
    s.beta = beta;
    s.gamma_c = z.data.row(t).segment<3>(layout.span(Block::GammaC).offset).transpose();
    s.tau_c = z.data.row(t).segment<3>(layout.span(Block::TauC).offset).transpose();
    s.gamma_w = traj.gamma_w[t];
    s.tau_w = traj.tau_w[t];
  }
  return out;
}

Eigen::MatrixXd sample_source_noise(Rng& rng, int frames, const NoiseSpec& spec,
                                    const LatentLayout& layout) {
  const Eigen::VectorXd sigma = spec.per_coordinate(layout);
  Eigen::MatrixXd eps(frames, layout.frame_width());
  for (int t = 0; t < frames; ++t) {
    for (int c = 0; c < sigma.size(); ++c) eps(t, c) = sigma(c) * rng.normal();
  }
  return eps;
}

}  // namespace anchorflow
