// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "anchorflow/geometry.hpp"

namespace anchorflow {

inline constexpr int kNumJoints = 22;      // root + 21 body joints
inline constexpr int kNumBodyJoints = 21;  // articulated, indices 1..21
inline constexpr int kNumTorso = 8;
inline constexpr int kNumNonTorso = 13;
inline constexpr int kShapeDims = 10;

using Vec10 = Eigen::Matrix<double, kShapeDims, 1>;
using BodyPoseMat = Eigen::Matrix<double, kNumBodyJoints, 3>;  // row j = axis-angle of joint j+1

// Per-frame articulated pose. global_orient/root_transl are interpreted in
// whichever frame (camera or world) the caller is working in.
struct Pose {
  BodyPoseMat body_pose = BodyPoseMat::Zero();
  Eigen::Vector3d global_orient = Eigen::Vector3d::Zero();
  Eigen::Vector3d root_transl = Eigen::Vector3d::Zero();
};

struct BodyShape {
  Vec10 beta = Vec10::Zero();
};

// Fixed joint tree with a linear shape basis over the rest offsets. Every
// parent index is smaller than its child, so plain index order is a valid
// topological order in both directions.
struct Skeleton {
  std::array<int, kNumJoints> parent;                    // parent[0] == -1
  std::array<Eigen::Vector3d, kNumJoints> rest_offset;   // meters, from parent
  std::array<std::string, kNumJoints> joint_names;
  Eigen::Matrix<double, 3 * kNumJoints, kShapeDims> shape_basis;  // rows = joint*3+axis

  static const Skeleton& standard();

  Eigen::Vector3d shaped_offset(int joint, const BodyShape& shape) const;
  // Cumulative rest-pose joint positions (identity pose, zero translation).
  std::array<Eigen::Vector3d, kNumJoints> rest_joints(const BodyShape& shape) const;
  int joint_index(const std::string& name) const;
};

// Torso / non-torso split of the 21 body joints: 8 well-constrained joints
// around the hips, spine, collars and neck vs. 13 distal ones.
struct Partition {
  std::array<int, kNumTorso> torso_ids;
  std::array<int, kNumNonTorso> non_torso_ids;

  static const Partition& standard();
};

// Low-poly skinned stand-in so per-vertex error is computable. At most two
// joints influence each vertex and every weight row sums to one.
struct ProxyMesh {
  Eigen::MatrixXd template_vertices;  // V x 3
  Eigen::MatrixXd skin_weights;       // V x 22

  static ProxyMesh generate(const Skeleton& skel, int vertex_count, uint64_t seed);
};

struct FkResult {
  std::array<Eigen::Vector3d, kNumJoints> joints;
  std::array<Eigen::Matrix3d, kNumJoints> chain_rot;  // global_orient composed with ancestors
  std::array<Eigen::Matrix3d, kNumJoints> local_rot;
};

FkResult forward_kinematics_full(const Pose& pose, const BodyShape& shape, const Skeleton& skel);
std::array<Eigen::Vector3d, kNumJoints> forward_kinematics(const Pose& pose, const BodyShape& shape,
                                                           const Skeleton& skel);

// One (child, parent) pair per non-root joint.
std::vector<std::pair<int, int>> bone_pairs(const Skeleton& skel);

Eigen::MatrixXd lbs_vertices(const Pose& pose, const BodyShape& shape, const ProxyMesh& mesh,
                             const Skeleton& skel);

struct FkGrads {
  BodyPoseMat d_body_pose = BodyPoseMat::Zero();
  Eigen::Vector3d d_global_orient = Eigen::Vector3d::Zero();
  Eigen::Vector3d d_root_transl = Eigen::Vector3d::Zero();
  Vec10 d_beta = Vec10::Zero();
};

// Reverse-mode pass through the kinematic chain. d_joints holds upstream
// gradients on joint positions; d_chain (optional) holds upstream gradients
// on the chain rotation matrices (used by skinning and by losses that read
// joint orientations).
FkGrads fk_backward(const Pose& pose, const BodyShape& shape, const Skeleton& skel,
                    const FkResult& fwd,
                    const std::array<Eigen::Vector3d, kNumJoints>& d_joints,
                    const std::array<Eigen::Matrix3d, kNumJoints>* d_chain = nullptr);

// Accumulates LBS vertex gradients onto joint-position / chain-rotation
// gradients, to be fed into fk_backward.
void lbs_backward(const ProxyMesh& mesh, const Skeleton& skel, const FkResult& fwd,
                  const Eigen::MatrixXd& d_vertices,
                  std::array<Eigen::Vector3d, kNumJoints>& d_joints,
                  std::array<Eigen::Matrix3d, kNumJoints>& d_chain);

}  // namespace anchorflow
