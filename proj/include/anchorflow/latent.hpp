// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <array>
#include <string>

#include "anchorflow/rng.hpp"
#include "anchorflow/skeleton.hpp"
#include "anchorflow/types.hpp"
#include "anchorflow/worldmotion.hpp"

namespace anchorflow {

// Named blocks of the per-frame completion latent, in storage order.
enum class Block : int {
  ThetaTorso = 0,
  ThetaNon = 1,
  JTorso = 2,
  JNon = 3,
  Beta = 4,
  GammaC = 5,
  TauC = 6,
  GammaGv = 7,
  VRoot = 8,
};
inline constexpr int kNumBlocks = 9;

struct LatentLayout {
  struct Span {
    int offset = 0;
    int width = 0;
  };
  std::array<Span, kNumBlocks> spans;
  std::array<std::string, kNumBlocks> names;

  static const LatentLayout& standard();

  const Span& span(Block b) const { return spans[static_cast<int>(b)]; }
  int frame_width() const;
  // Stable content hash of block names/offsets/widths plus the joint order;
  // persisted files and checkpoints must agree on it.
  std::string content_hash(const Skeleton& skel) const;
};

inline constexpr int kFrameWidth = 148;

struct CompositeLatent {
  Eigen::MatrixXd data;  // T x frame_width

  int frames() const { return static_cast<int>(data.rows()); }
};

// Per-coordinate {0,1} vector, broadcast over frames: zero on the anchored
// blocks (torso pose/joints, shape, camera trajectory), one on the generated
// blocks (non-torso pose/joints, gravity-view orientation, root velocity).
struct KnownMask {
  Eigen::VectorXd mask;

  static KnownMask standard(const LatentLayout& layout);
  int generated_count() const { return static_cast<int>(mask.sum()); }
};

// Per-block source standard deviations. Joint-position blocks default to a
// tighter 0.5 since isotropic noise is more destructive in Cartesian space.
struct NoiseSpec {
  std::array<double, kNumBlocks> sigma;

  NoiseSpec();
  Eigen::VectorXd per_coordinate(const LatentLayout& layout) const;  // validates sigma > 0
};

// Packs a motion sequence into the latent: pose split by the partition,
// camera-space joint positions of those joints, shape replicated per frame,
// camera trajectory, and the gravity-view encoding of the world trajectory.
CompositeLatent build_latent(const MotionSequence& states, const Partition& part,
                             const Skeleton& skel, const Eigen::Vector3d& gravity, double fps);

struct DecodedLatent {
  MotionSequence states;
  Eigen::MatrixXd j_torso;  // T x 24, auxiliary joint-position branch
  Eigen::MatrixXd j_non;    // T x 39
};

// Inverse of build_latent on the housed fields; shape is mean-pooled over
// frames and the world trajectory is rolled out in the given gravity frame
// from tau0.
DecodedLatent decode_latent(const CompositeLatent& z, const Partition& part,
                            const GravityFrame& frame, const Eigen::Vector3d& tau0, double fps);

Eigen::MatrixXd sample_source_noise(Rng& rng, int frames, const NoiseSpec& spec,
                                    const LatentLayout& layout);

}  // namespace anchorflow
