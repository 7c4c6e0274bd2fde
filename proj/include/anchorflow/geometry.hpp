// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <array>

namespace anchorflow {

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

// Rodrigues rotation. Below kSmallAngle the second-order series is used; the
// threshold is tie-broken toward the series branch.
inline constexpr double kSmallAngle = 1e-8;

// Throws std::invalid_argument on non-finite input.
Eigen::Matrix3d axis_angle_to_matrix(const Eigen::Vector3d& aa);

// Log map. Returns the canonical axis-angle with magnitude in [0, pi].
Eigen::Vector3d matrix_to_axis_angle(const Eigen::Matrix3d& rot);

struct RotationJacobian {
  Eigen::Matrix3d rot;
  std::array<Eigen::Matrix3d, 3> d_rot;  // dR/d(aa_k)
};

// Rotation together with its derivative w.r.t. each axis-angle component.
RotationJacobian axis_angle_jacobian(const Eigen::Vector3d& aa);

// d(R(aa) * u)/d(aa), columns indexed by the axis-angle component.
Eigen::Matrix3d rotate_point_jacobian(const RotationJacobian& jac, const Eigen::Vector3d& u);

}  // namespace anchorflow
