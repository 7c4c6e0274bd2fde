// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include "anchorflow/geometry.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <stdexcept>

namespace anchorflow {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Eigen::Matrix3d axis_angle_to_matrix(const Eigen::Vector3d& aa) {
  if (!aa.allFinite()) throw std::invalid_argument("axis_angle_to_matrix: non-finite input");
  const double theta = aa.norm();
  const Eigen::Matrix3d k = skew(aa);
  if (theta <= kSmallAngle) {
    return Eigen::Matrix3d::Identity() + k + 0.5 * (k * k);
  }
  const double s = std::sin(theta) / theta;
  const double c = (1.0 - std::cos(theta)) / (theta * theta);
  return Eigen::Matrix3d::Identity() + s * k + c * (k * k);
}

Eigen::Vector3d matrix_to_axis_angle(const Eigen::Matrix3d& rot) {
  const double tr = rot.trace();
  const double cos_t = std::min(1.0, std::max(-1.0, 0.5 * (tr - 1.0)));
  const double theta = std::acos(cos_t);
  const Eigen::Vector3d vee(rot(2, 1) - rot(1, 2), rot(0, 2) - rot(2, 0), rot(1, 0) - rot(0, 1));
  if (theta < 1e-7) {
    return 0.5 * vee;
  }
  if (M_PI - theta < 1e-6) {
    // Axis from the dominant column of (R + I)/2; the skew part fixes the
    // sign where it is still nonzero.
    const Eigen::Matrix3d m = 0.5 * (rot + Eigen::Matrix3d::Identity());
    int k = 0;
    m.diagonal().maxCoeff(&k);
    Eigen::Vector3d axis = m.col(k) / std::sqrt(std::max(m(k, k), 1e-12));
    axis.normalize();
    if (vee.dot(axis) < 0.0) axis = -axis;
    return theta * axis;
  }
  return (theta / (2.0 * std::sin(theta))) * vee;
}

RotationJacobian axis_angle_jacobian(const Eigen::Vector3d& aa) {
  RotationJacobian out;
  out.rot = axis_angle_to_matrix(aa);
  const double theta2 = aa.squaredNorm();
  if (theta2 <= kSmallAngle * kSmallAngle) {
    // Derivative of the second-order series, exact to O(theta^2).
    const Eigen::Matrix3d k = skew(aa);
    for (int i = 0; i < 3; ++i) {
      const Eigen::Matrix3d e = skew(Eigen::Vector3d::Unit(i));
      out.d_rot[i] = e + 0.5 * (e * k + k * e);
    }
    return out;
  }
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3d ei = Eigen::Vector3d::Unit(i);
    const Eigen::Vector3d w = aa.cross((Eigen::Matrix3d::Identity() - out.rot) * ei);
    out.d_rot[i] = ((aa(i) * skew(aa) + skew(w)) / theta2) * out.rot;
  }
  return out;
}

Eigen::Matrix3d rotate_point_jacobian(const RotationJacobian& jac, const Eigen::Vector3d& u) {
  Eigen::Matrix3d j;
  for (int i = 0; i < 3; ++i) j.col(i) = jac.d_rot[i] * u;
  return j;
}

}  // namespace anchorflow
