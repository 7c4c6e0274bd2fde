// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <vector>

namespace anchorflow {

inline const Eigen::Vector3d kDefaultGravity(0.0, -9.81, 0.0);

// Gravity-aligned coordinate frame: coords_gv = world_to_gv * coords_world.
// Its vertical axis opposes gravity; yaw is anchored either at a reference
// orientation's horizontal heading or, for the canonical frame, at the world
// axes themselves.
struct GravityFrame {
  Eigen::Matrix3d world_to_gv = Eigen::Matrix3d::Identity();

  // Yaw anchored to the horizontal heading of first_orientation (its body
  // forward axis projected onto the ground plane).
  static GravityFrame from_gravity(const Eigen::Vector3d& g, const Eigen::Matrix3d& first_orientation);
  // Yaw anchored to the world axes; used when no reference orientation exists
  // (e.g. decoding model output, whose world frame is only defined up to yaw).
  static GravityFrame canonical(const Eigen::Vector3d& g);

  Eigen::Vector3d up_axis() const { return world_to_gv.row(1).transpose(); }
};

struct WorldTrajectory {
  std::vector<Eigen::Vector3d> gamma_w;  // per-frame axis-angle
  std::vector<Eigen::Vector3d> tau_w;    // per-frame root position, meters
  double fps = 30.0;
};

struct GvEncoding {
  std::vector<Eigen::Vector3d> gamma_gv;  // log(F * R_w)
  std::vector<Eigen::Vector3d> v_root;    // root-local displacement per frame, meters/frame
  GravityFrame frame;
};

// gamma_gv_t = log(F R_w(t)); v_root_t = R_w(t)^T (tau_w(t+1) - tau_w(t)),
// with the final frame copying the previous velocity.
GvEncoding encode_gv(const WorldTrajectory& traj, const Eigen::Vector3d& g);

// Inverse rollout: R_w(t) = F^T exp(gamma_gv_t), tau_w(t+1) = tau_w(t) + R_w(t) v_root_t.
WorldTrajectory recover_world(const std::vector<Eigen::Vector3d>& gamma_gv,
                              const std::vector<Eigen::Vector3d>& v_root,
                              const GravityFrame& frame, const Eigen::Vector3d& tau0, double fps);

}  // namespace anchorflow
