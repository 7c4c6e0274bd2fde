// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used only to verify the production
// code. They deliberately avoid the library's own code paths.

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <vector>

#include "anchorflow/rng.hpp"
#include "anchorflow/skeleton.hpp"

namespace oracles {

// Axis-angle to rotation via hand-written quaternion composition.
inline Eigen::Matrix3d quaternion_rotation(const Eigen::Vector3d& aa) {
  const double theta = aa.norm();
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;
  if (theta > 0.0) {
    const Eigen::Vector3d axis = aa / theta;
    w = std::cos(0.5 * theta);
    const double s = std::sin(0.5 * theta);
    x = s * axis.x();
    y = s * axis.y();
    z = s * axis.z();
  }
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

// Log map via quaternion extraction.
inline Eigen::Vector3d quaternion_log(const Eigen::Matrix3d& r) {
  const double w = 0.5 * std::sqrt(std::max(0.0, 1.0 + r.trace()));
  Eigen::Vector3d v(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  v *= 0.25;
  const double sin_half = v.norm();
  if (sin_half < 1e-12) return 2.0 * v;
  const double half = std::atan2(sin_half, w);
  return (2.0 * half / sin_half) * v;
}

// Naive per-joint forward kinematics: for each joint independently, walk the
// ancestor path from the root composing rotations from scratch.
inline std::array<Eigen::Vector3d, anchorflow::kNumJoints> recursive_fk(
    const anchorflow::Pose& pose, const anchorflow::BodyShape& shape,
    const anchorflow::Skeleton& skel) {
  using namespace anchorflow;
  std::array<Eigen::Vector3d, kNumJoints> joints;
  for (int j = 0; j < kNumJoints; ++j) {
    std::vector<int> path;  // root ... j
    for (int a = j; a >= 0; a = skel.parent[a]) path.push_back(a);
    std::reverse(path.begin(), path.end());
    Eigen::Vector3d pos = pose.root_transl;
    Eigen::Matrix3d rot = quaternion_rotation(pose.global_orient);
    for (size_t i = 1; i < path.size(); ++i) {
      const int a = path[i];
      pos += rot * skel.shaped_offset(a, shape);
      rot = rot * quaternion_rotation(pose.body_pose.row(a - 1).transpose());
    }
    joints[j] = pos;
  }
  return joints;
}

// Rigid/similarity alignment via Horn's closed-form quaternion method with a
// power-iteration eigen solve; no SVD, no library alignment code.
struct HornAlignment {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

inline HornAlignment horn_align(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                bool with_scale) {
  const int n = static_cast<int>(x.rows());
  const Eigen::RowVector3d mx = x.colwise().mean();
  const Eigen::RowVector3d my = y.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - mx;
  const Eigen::MatrixXd yc = y.rowwise() - my;
  const Eigen::Matrix3d s = yc.transpose() * xc;  // maps y -> x

  Eigen::Matrix4d k;
  k << s(0, 0) + s(1, 1) + s(2, 2), s(1, 2) - s(2, 1), s(2, 0) - s(0, 2), s(0, 1) - s(1, 0),
      s(1, 2) - s(2, 1), s(0, 0) - s(1, 1) - s(2, 2), s(0, 1) + s(1, 0), s(2, 0) + s(0, 2),
      s(2, 0) - s(0, 2), s(0, 1) + s(1, 0), -s(0, 0) + s(1, 1) - s(2, 2), s(1, 2) + s(2, 1),
      s(0, 1) - s(1, 0), s(2, 0) + s(0, 2), s(1, 2) + s(2, 1), -s(0, 0) - s(1, 1) + s(2, 2);

  // Shifted power iteration for the dominant eigenvector.
  const double shift = 2.0 * s.cwiseAbs().sum() + 1.0;
  Eigen::Vector4d q(1, 0.02, -0.013, 0.007);
  q.normalize();
  for (int it = 0; it < 400; ++it) {
    q = (k * q + shift * q).normalized();
  }
  const double w = q(0), qx = q(1), qy = q(2), qz = q(3);
  HornAlignment out;
  out.rotation << 1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - w * qz), 2 * (qx * qz + w * qy),
      2 * (qx * qy + w * qz), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - w * qx),
      2 * (qx * qz - w * qy), 2 * (qy * qz + w * qx), 1 - 2 * (qx * qx + qy * qy);
  if (with_scale) {
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) {
      num += (out.rotation * yc.row(i).transpose()).dot(xc.row(i).transpose());
      den += yc.row(i).squaredNorm();
    }
    out.scale = num / den;
  }
  out.translation = mx.transpose() - out.scale * out.rotation * my.transpose();
  return out;
}

inline double alignment_residual(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double scale,
                                 const Eigen::Matrix3d& rot, const Eigen::Vector3d& t) {
  double sum = 0.0;
  for (int i = 0; i < x.rows(); ++i) {
    sum += (scale * rot * y.row(i).transpose() + t - x.row(i).transpose()).squaredNorm();
  }
  return sum;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const int n = static_cast<int>(a.size());
  double ma = 0, mb = 0;
  for (int i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double num = 0, va = 0, vb = 0;
  for (int i = 0; i < n; ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return num / std::sqrt(va * vb);
}

}  // namespace oracles
