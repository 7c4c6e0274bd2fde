// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include "anchorflow/flowmatch.hpp"

#include <stdexcept>
#include <string>

#include "anchorflow/errors.hpp"

namespace anchorflow {

namespace {

void check_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }
}

}  // namespace

CompositeLatent masked_path(const CompositeLatent& z, const Eigen::MatrixXd& eps,
                            const KnownMask& mask, double t) {
  check_shape(z.data, eps, "masked_path");
  if (z.data.cols() != mask.mask.size()) throw std::invalid_argument("masked_path: mask width");
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("masked_path: t outside [0,1]");
  CompositeLatent out;
  out.data = z.data;
  for (int c = 0; c < mask.mask.size(); ++c) {
    if (mask.mask(c) != 0.0) {
      out.data.col(c) = (1.0 - t) * eps.col(c) + t * z.data.col(c);
    }
  }
  return out;
}

double fm_loss(const Eigen::MatrixXd& v_pred, const CompositeLatent& z, const Eigen::MatrixXd& eps,
               const KnownMask& mask) {
  check_shape(v_pred, z.data, "fm_loss");
  check_shape(v_pred, eps, "fm_loss");
  double sum = 0.0;
  int count = 0;
  for (int c = 0; c < mask.mask.size(); ++c) {
    if (mask.mask(c) == 0.0) continue;
    sum += (v_pred.col(c) - (z.data.col(c) - eps.col(c))).squaredNorm();
    count += static_cast<int>(v_pred.rows());
  }
  return count > 0 ? sum / count : 0.0;
}

Eigen::MatrixXd fm_loss_grad(const Eigen::MatrixXd& v_pred, const CompositeLatent& z,
                             const Eigen::MatrixXd& eps, const KnownMask& mask) {
  check_shape(v_pred, z.data, "fm_loss_grad");
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(v_pred.rows(), v_pred.cols());
  const double count = v_pred.rows() * mask.mask.sum();
  if (count == 0.0) return grad;
  for (int c = 0; c < mask.mask.size(); ++c) {
    if (mask.mask(c) == 0.0) continue;
    grad.col(c) = 2.0 / count * (v_pred.col(c) - (z.data.col(c) - eps.col(c)));
  }
  return grad;
}

ConditionSet make_uncond_condition(const ConditionSet& c) {
  ConditionSet out = c;
  out.kp_rays.setZero();
  out.img_feat.setZero();
  return out;
}

Eigen::MatrixXd cfg_velocity(const Eigen::MatrixXd& v_cond, const Eigen::MatrixXd& v_uncond,
                             double scale) {
  check_shape(v_cond, v_uncond, "cfg_velocity");
  if (!(scale >= 0.0)) throw std::invalid_argument("cfg_velocity: scale must be non-negative");
  return v_uncond + scale * (v_cond - v_uncond);
}

CompositeLatent sample(const VelocityField& vfield, const CompositeLatent& anchor_latent,
                       const KnownMask& mask, const ConditionSet& cond, const SampleOptions& opts,
                       const NoiseSpec& noise, Rng& rng) {
  if (opts.steps < 1) throw std::invalid_argument("sample: steps must be >= 1");
  const LatentLayout& layout = LatentLayout::standard();
  const int frames = anchor_latent.frames();
  const Eigen::MatrixXd eps = sample_source_noise(rng, frames, noise, layout);
  const ConditionSet uncond = make_uncond_condition(cond);

  const auto reimpose = [&](CompositeLatent& z) {
    for (int c = 0; c < mask.mask.size(); ++c) {
      if (mask.mask(c) == 0.0) z.data.col(c) = anchor_latent.data.col(c);
    }
  };

  CompositeLatent z;
  z.data = eps;
  reimpose(z);

  const double dt = 1.0 / opts.steps;
  for (int k = 0; k < opts.steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Eigen::MatrixXd v_c = vfield.evaluate(z.data, t, cond);
    const Eigen::MatrixXd v_u = vfield.evaluate(z.data, t, uncond);
    const Eigen::MatrixXd v = cfg_velocity(v_c, v_u, opts.cfg_scale);
    for (int c = 0; c < mask.mask.size(); ++c) {
      if (mask.mask(c) != 0.0) z.data.col(c) += dt * v.col(c);
    }
    reimpose(z);
    if (!z.data.allFinite()) {
      throw DivergenceError("sample: non-finite latent after step " + std::to_string(k));
    }
  }
  return z;
}

}  // namespace anchorflow
