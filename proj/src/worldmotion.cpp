// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include "anchorflow/worldmotion.hpp"

#include <Eigen/Geometry>

#include <stdexcept>

#include "anchorflow/geometry.hpp"

namespace anchorflow {

namespace {

GravityFrame frame_from_up_and_heading(const Eigen::Vector3d& up, Eigen::Vector3d heading) {
  heading -= heading.dot(up) * up;
  if (heading.norm() < 1e-9) {
    // Degenerate heading (parallel to gravity); fall back to a world axis.
    heading = Eigen::Vector3d::UnitZ() - Eigen::Vector3d::UnitZ().dot(up) * up;
    if (heading.norm() < 1e-9) {
      heading = Eigen::Vector3d::UnitX() - Eigen::Vector3d::UnitX().dot(up) * up;
    }
  }
  heading.normalize();
  const Eigen::Vector3d x = up.cross(heading);
  GravityFrame f;
  f.world_to_gv.row(0) = x.transpose();
  f.world_to_gv.row(1) = up.transpose();
  f.world_to_gv.row(2) = heading.transpose();
  return f;
}

}  // namespace

GravityFrame GravityFrame::from_gravity(const Eigen::Vector3d& g,
                                        const Eigen::Matrix3d& first_orientation) {
  if (g.norm() <= 0.0) throw std::invalid_argument("GravityFrame: zero gravity");
  const Eigen::Vector3d up = -g.normalized();
  // Body forward axis of the reference orientation.
  const Eigen::Vector3d heading = first_orientation * Eigen::Vector3d::UnitZ();
  return frame_from_up_and_heading(up, heading);
}

GravityFrame GravityFrame::canonical(const Eigen::Vector3d& g) {
  if (g.norm() <= 0.0) throw std::invalid_argument("GravityFrame: zero gravity");
  const Eigen::Vector3d up = -g.normalized();
  return frame_from_up_and_heading(up, Eigen::Vector3d::UnitZ());
}

GvEncoding encode_gv(const WorldTrajectory& traj, const Eigen::Vector3d& g) {
  if (g.norm() <= 0.0) throw std::invalid_argument("encode_gv: zero gravity");
  if (traj.gamma_w.empty() || traj.gamma_w.size() != traj.tau_w.size()) {
    throw std::invalid_argument("encode_gv: bad trajectory lengths");
  }
  const int n = static_cast<int>(traj.gamma_w.size());
  GvEncoding enc;
  enc.frame = GravityFrame::from_gravity(g, axis_angle_to_matrix(traj.gamma_w[0]));
  enc.gamma_gv.resize(n);
  enc.v_root.resize(n);
  for (int t = 0; t < n; ++t) {
    const Eigen::Matrix3d rw = axis_angle_to_matrix(traj.gamma_w[t]);
    enc.gamma_gv[t] = matrix_to_axis_angle(enc.frame.world_to_gv * rw);
    if (t + 1 < n) {
      enc.v_root[t] = rw.transpose() * (traj.tau_w[t + 1] - traj.tau_w[t]);
    } else {
      enc.v_root[t] = (n > 1) ? enc.v_root[n - 2] : Eigen::Vector3d::Zero();
    }
  }
  return enc;
}

WorldTrajectory recover_world(const std::vector<Eigen::Vector3d>& gamma_gv,
                              const std::vector<Eigen::Vector3d>& v_root,
                              const GravityFrame& frame, const Eigen::Vector3d& tau0, double fps) {
  if (gamma_gv.size() != v_root.size()) {
    throw std::invalid_argument("recover_world: sequence length mismatch");
  }
  const int n = static_cast<int>(gamma_gv.size());
  WorldTrajectory traj;
  traj.fps = fps;
  traj.gamma_w.resize(n);
  traj.tau_w.resize(n);
  Eigen::Vector3d tau = tau0;
  for (int t = 0; t < n; ++t) {
    const Eigen::Matrix3d rw =
        frame.world_to_gv.transpose() * axis_angle_to_matrix(gamma_gv[t]);
    traj.gamma_w[t] = matrix_to_axis_angle(rw);
    traj.tau_w[t] = tau;
    if (t + 1 < n) tau += rw * v_root[t];
  }
  return traj;
}

}  // namespace anchorflow
