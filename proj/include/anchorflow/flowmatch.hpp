// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include "anchorflow/latent.hpp"
#include "anchorflow/types.hpp"

namespace anchorflow {

// Interpolant that transports only the generated coordinates from source
// noise to data while the anchored coordinates stay at their data values:
//   z_t = (1-M).z + M.((1-t) eps + t z)
CompositeLatent masked_path(const CompositeLatent& z, const Eigen::MatrixXd& eps,
                            const KnownMask& mask, double t);

// Mean squared velocity error over the generated coordinates only; anchored
// coordinates contribute exactly zero.
double fm_loss(const Eigen::MatrixXd& v_pred, const CompositeLatent& z, const Eigen::MatrixXd& eps,
               const KnownMask& mask);

// Gradient of fm_loss w.r.t. v_pred.
Eigen::MatrixXd fm_loss_grad(const Eigen::MatrixXd& v_pred, const CompositeLatent& z,
                             const Eigen::MatrixXd& eps, const KnownMask& mask);

// Reduced condition for guidance: keeps the anchor-related channels (bbox,
// relative camera motion, torso-pose condition) and zeroes the
// articulation-related ones (keypoint rays, image features).
ConditionSet make_uncond_condition(const ConditionSet& c);

// v_uncond + s * (v_cond - v_uncond)
Eigen::MatrixXd cfg_velocity(const Eigen::MatrixXd& v_cond, const Eigen::MatrixXd& v_uncond,
                             double scale);

// Velocity model handle. Evaluation must be side-effect free.
class VelocityField {
 public:
  virtual ~VelocityField() = default;
  virtual Eigen::MatrixXd evaluate(const Eigen::MatrixXd& z_t, double t,
                                   const ConditionSet& cond) const = 0;
};

struct SampleOptions {
  int steps = 50;
  double cfg_scale = 1.5;
};

// Fixed-step Euler integration over t in [0,1]. Generated coordinates start
// from source noise, anchored coordinates from anchor_latent and are
// re-imposed after every update. Throws DivergenceError (naming the step) if
// the state goes non-finite.
CompositeLatent sample(const VelocityField& vfield, const CompositeLatent& anchor_latent,
                       const KnownMask& mask, const ConditionSet& cond, const SampleOptions& opts,
                       const NoiseSpec& noise, Rng& rng);

}  // namespace anchorflow
