// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include "anchorflow/skeleton.hpp"

#include <stdexcept>

#include "anchorflow/rng.hpp"

namespace anchorflow {

namespace {

Skeleton make_standard_skeleton() {
  Skeleton s;
  auto set = [&s](int j, int parent, double x, double y, double z, const char* name) {
    s.parent[j] = parent;
    s.rest_offset[j] = Eigen::Vector3d(x, y, z);
    s.joint_names[j] = name;
  };
  // Proportions loosely follow an adult body; +x left, +y up, +z forward.
  set(0, -1, 0.00, 0.00, 0.00, "pelvis");
  set(1, 0, 0.09, -0.07, 0.00, "left_hip");
  set(2, 0, -0.09, -0.07, 0.00, "right_hip");
  set(3, 0, 0.00, 0.11, 0.00, "spine1");
  set(4, 1, 0.00, -0.38, 0.00, "left_knee");
  set(5, 2, 0.00, -0.38, 0.00, "right_knee");
  set(6, 3, 0.00, 0.12, 0.00, "spine2");
  set(7, 4, 0.00, -0.40, 0.00, "left_ankle");
  set(8, 5, 0.00, -0.40, 0.00, "right_ankle");
  set(9, 6, 0.00, 0.13, 0.00, "spine3");
  set(10, 7, 0.00, -0.06, 0.13, "left_foot");
  set(11, 8, 0.00, -0.06, 0.13, "right_foot");
  set(12, 9, 0.00, 0.14, 0.00, "neck");
  set(13, 9, 0.05, 0.10, 0.00, "left_collar");
  set(14, 9, -0.05, 0.10, 0.00, "right_collar");
  set(15, 12, 0.00, 0.12, 0.00, "head");
  set(16, 13, 0.12, 0.00, 0.00, "left_shoulder");
  set(17, 14, -0.12, 0.00, 0.00, "right_shoulder");
  set(18, 16, 0.26, 0.00, 0.00, "left_elbow");
  set(19, 17, -0.26, 0.00, 0.00, "right_elbow");
  set(20, 18, 0.25, 0.00, 0.00, "left_wrist");
  set(21, 19, -0.25, 0.00, 0.00, "right_wrist");

  // Seeded shape directions, <= 2 cm per unit shape coefficient. The root
  // row stays zero so translation alone positions the root.
  s.shape_basis.setZero();
  Rng rng(0x5ca1ab1e);
  for (int j = 1; j < kNumJoints; ++j) {
    for (int a = 0; a < 3; ++a) {
      for (int k = 0; k < kShapeDims; ++k) {
        s.shape_basis(3 * j + a, k) = rng.uniform(-0.02, 0.02);
      }
    }
  }
  return s;
}

}  // namespace

const Skeleton& Skeleton::standard() {
  static const Skeleton s = make_standard_skeleton();
  return s;
}

Eigen::Vector3d Skeleton::shaped_offset(int joint, const BodyShape& shape) const {
  return rest_offset[joint] + shape_basis.block<3, kShapeDims>(3 * joint, 0) * shape.beta;
}

std::array<Eigen::Vector3d, kNumJoints> Skeleton::rest_joints(const BodyShape& shape) const {
  std::array<Eigen::Vector3d, kNumJoints> out;
  out[0] = Eigen::Vector3d::Zero();
  for (int j = 1; j < kNumJoints; ++j) out[j] = out[parent[j]] + shaped_offset(j, shape);
  return out;
}

int Skeleton::joint_index(const std::string& name) const {
  for (int j = 0; j < kNumJoints; ++j) {
    if (joint_names[j] == name) return j;
  }
  throw std::invalid_argument("unknown joint name: " + name);
}

const Partition& Partition::standard() {
  static const Partition p = {
      {1, 2, 3, 6, 9, 12, 13, 14},
      {4, 5, 7, 8, 10, 11, 15, 16, 17, 18, 19, 20, 21},
  };
  return p;
}

ProxyMesh ProxyMesh::generate(const Skeleton& skel, int vertex_count, uint64_t seed) {
  if (vertex_count < 1) throw std::invalid_argument("ProxyMesh: vertex_count must be positive");
  ProxyMesh mesh;
  mesh.template_vertices.resize(vertex_count, 3);
  mesh.skin_weights = Eigen::MatrixXd::Zero(vertex_count, kNumJoints);
  Rng rng(seed);
  const auto bind = skel.rest_joints(BodyShape{});
  for (int v = 0; v < vertex_count; ++v) {
    const int j = rng.uniform_int(1, kNumJoints - 1);
    const int p = skel.parent[j];
    const double w = rng.uniform(0.55, 1.0);
    mesh.skin_weights(v, j) = w;
    mesh.skin_weights(v, p) = 1.0 - w;
    for (int a = 0; a < 3; ++a) {
      mesh.template_vertices(v, a) = bind[j](a) + rng.uniform(-0.12, 0.12);
    }
  }
  return mesh;
}

FkResult forward_kinematics_full(const Pose& pose, const BodyShape& shape, const Skeleton& skel) {
  if (!pose.body_pose.allFinite() || !pose.global_orient.allFinite() ||
      !pose.root_transl.allFinite() || !shape.beta.allFinite()) {
    throw std::invalid_argument("forward_kinematics: non-finite input");
  }
  FkResult out;
  out.local_rot[0] = axis_angle_to_matrix(pose.global_orient);
  out.chain_rot[0] = out.local_rot[0];
  out.joints[0] = pose.root_transl;
  for (int j = 1; j < kNumJoints; ++j) {
    const int p = skel.parent[j];
    out.local_rot[j] = axis_angle_to_matrix(pose.body_pose.row(j - 1).transpose());
    out.chain_rot[j] = out.chain_rot[p] * out.local_rot[j];
    out.joints[j] = out.joints[p] + out.chain_rot[p] * skel.shaped_offset(j, shape);
  }
  return out;
}

std::array<Eigen::Vector3d, kNumJoints> forward_kinematics(const Pose& pose, const BodyShape& shape,
                                                           const Skeleton& skel) {
  return forward_kinematics_full(pose, shape, skel).joints;
}

std::vector<std::pair<int, int>> bone_pairs(const Skeleton& skel) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(kNumJoints - 1);
  for (int j = 1; j < kNumJoints; ++j) pairs.emplace_back(j, skel.parent[j]);
  return pairs;
}

Eigen::MatrixXd lbs_vertices(const Pose& pose, const BodyShape& shape, const ProxyMesh& mesh,
                             const Skeleton& skel) {
  const FkResult fk = forward_kinematics_full(pose, shape, skel);
  const auto bind = skel.rest_joints(BodyShape{});
  const int n = static_cast<int>(mesh.template_vertices.rows());
  Eigen::MatrixXd verts = Eigen::MatrixXd::Zero(n, 3);
  for (int v = 0; v < n; ++v) {
    const Eigen::Vector3d tv = mesh.template_vertices.row(v).transpose();
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    for (int j = 0; j < kNumJoints; ++j) {
      const double w = mesh.skin_weights(v, j);
      if (w == 0.0) continue;
      acc += w * (fk.chain_rot[j] * (tv - bind[j]) + fk.joints[j]);
    }
    verts.row(v) = acc.transpose();
  }
  return verts;
}

FkGrads fk_backward(const Pose& pose, const BodyShape& shape, const Skeleton& skel,
                    const FkResult& fwd,
                    const std::array<Eigen::Vector3d, kNumJoints>& d_joints,
                    const std::array<Eigen::Matrix3d, kNumJoints>* d_chain) {
  std::array<Eigen::Vector3d, kNumJoints> gx = d_joints;
  std::array<Eigen::Matrix3d, kNumJoints> gc;
  for (int j = 0; j < kNumJoints; ++j) {
    gc[j] = d_chain ? (*d_chain)[j] : Eigen::Matrix3d::Zero();
  }

  FkGrads grads;
  for (int j = kNumJoints - 1; j >= 1; --j) {
    const int p = skel.parent[j];
    const Eigen::Vector3d offset = skel.shaped_offset(j, shape);
    gx[p] += gx[j];
    gc[p] += gx[j] * offset.transpose();
    gc[p] += gc[j] * fwd.local_rot[j].transpose();

    const Eigen::Matrix3d g_local = fwd.chain_rot[p].transpose() * gc[j];
    const RotationJacobian jac = axis_angle_jacobian(pose.body_pose.row(j - 1).transpose());
    for (int k = 0; k < 3; ++k) {
      grads.d_body_pose(j - 1, k) = (g_local.array() * jac.d_rot[k].array()).sum();
    }
    const Eigen::Vector3d g_offset = fwd.chain_rot[p].transpose() * gx[j];
    grads.d_beta += skel.shape_basis.block<3, kShapeDims>(3 * j, 0).transpose() * g_offset;
  }
  grads.d_root_transl = gx[0];
  const RotationJacobian jac0 = axis_angle_jacobian(pose.global_orient);
  for (int k = 0; k < 3; ++k) {
    grads.d_global_orient(k) = (gc[0].array() * jac0.d_rot[k].array()).sum();
  }
  return grads;
}

void lbs_backward(const ProxyMesh& mesh, const Skeleton& skel, const FkResult& fwd,
                  const Eigen::MatrixXd& d_vertices,
                  std::array<Eigen::Vector3d, kNumJoints>& d_joints,
                  std::array<Eigen::Matrix3d, kNumJoints>& d_chain) {
  const auto bind = skel.rest_joints(BodyShape{});
  const int n = static_cast<int>(mesh.template_vertices.rows());
  for (int v = 0; v < n; ++v) {
    const Eigen::Vector3d gv = d_vertices.row(v).transpose();
    const Eigen::Vector3d tv = mesh.template_vertices.row(v).transpose();
    for (int j = 0; j < kNumJoints; ++j) {
      const double w = mesh.skin_weights(v, j);
      if (w == 0.0) continue;
      d_joints[j] += w * gv;
      d_chain[j] += (w * gv) * (tv - bind[j]).transpose();
    }
  }
}

}  // namespace anchorflow
