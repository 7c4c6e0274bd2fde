// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "anchorflow/errors.hpp"
#include "anchorflow/camera.hpp"
#include "anchorflow/flowmatch.hpp"

using namespace anchorflow;

namespace {

Eigen::MatrixXd random_latent(Rng& rng, int frames) {
  Eigen::MatrixXd m(frames, kFrameWidth);
  for (int r = 0; r < frames; ++r) {
    for (int c = 0; c < kFrameWidth; ++c) m(r, c) = rng.normal();
  }
  return m;
}

class LambdaField : public VelocityField {
 public:
  using Fn = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, double, const ConditionSet&)>;
  explicit LambdaField(Fn fn) : fn_(std::move(fn)) {}
  Eigen::MatrixXd evaluate(const Eigen::MatrixXd& z, double t,
                           const ConditionSet& c) const override {
    return fn_(z, t, c);
  }

 private:
  Fn fn_;
};

}  // namespace

TEST_CASE("masked_path endpoints and mask semantics") {
  Rng rng(61);
  const KnownMask mask = KnownMask::standard(LatentLayout::standard());
  CompositeLatent z;
  z.data = random_latent(rng, 9);
  const Eigen::MatrixXd eps = random_latent(rng, 9);

  const CompositeLatent at1 = masked_path(z, eps, mask, 1.0);
  CHECK((at1.data - z.data).cwiseAbs().maxCoeff() == 0.0);

  const CompositeLatent at0 = masked_path(z, eps, mask, 0.0);
  for (int c = 0; c < kFrameWidth; ++c) {
    const Eigen::VectorXd expect =
        mask.mask(c) != 0.0 ? Eigen::VectorXd(eps.col(c)) : Eigen::VectorXd(z.data.col(c));
    CHECK((at0.data.col(c) - expect).cwiseAbs().maxCoeff() == 0.0);
  }

  for (double t : {0.0, 0.3, 0.7, 1.0}) {
    const CompositeLatent zt = masked_path(z, eps, mask, t);
    for (int c = 0; c < kFrameWidth; ++c) {
      if (mask.mask(c) == 0.0) {
        CHECK((zt.data.col(c) - z.data.col(c)).cwiseAbs().maxCoeff() == 0.0);
      }
    }
  }
  CHECK_THROWS_AS(masked_path(z, eps, mask, 1.5), std::invalid_argument);
}

TEST_CASE("fm_loss is zero at the exact target and blind to anchored coordinates") {
  Rng rng(62);
  const KnownMask mask = KnownMask::standard(LatentLayout::standard());
  CompositeLatent z;
  z.data = random_latent(rng, 6);
  const Eigen::MatrixXd eps = random_latent(rng, 6);

  const Eigen::MatrixXd exact = z.data - eps;
  CHECK(fm_loss(exact, z, eps, mask) == 0.0);

  Eigen::MatrixXd scrambled = exact;
  for (int c = 0; c < kFrameWidth; ++c) {
    if (mask.mask(c) == 0.0) scrambled.col(c).setConstant(1e9);
  }
  CHECK(fm_loss(scrambled, z, eps, mask) == 0.0);

  // v = 0 against z = eps + c * mask gives exactly c^2.
  const double c = 1.7;
  CompositeLatent shifted;
  shifted.data = eps;
  for (int col = 0; col < kFrameWidth; ++col) {
    if (mask.mask(col) != 0.0) shifted.data.col(col).array() += c;
  }
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(6, kFrameWidth);
  CHECK(fm_loss(zero, shifted, eps, mask) == doctest::Approx(c * c).epsilon(1e-12));
}

TEST_CASE("make_uncond_condition keeps anchor channels and zeroes articulation channels") {
  Rng rng(63);
  ConditionSet c = ConditionSet::zeros(5, 22 * ray_embedding_dim());
  c.bbox.setRandom();
  c.kp_rays.setRandom();
  c.img_feat.setRandom();
  c.rel_cam.setRandom();
  c.torso_pose.setRandom();
  const ConditionSet u = make_uncond_condition(c);
  CHECK((u.bbox - c.bbox).cwiseAbs().maxCoeff() == 0.0);
  CHECK((u.rel_cam - c.rel_cam).cwiseAbs().maxCoeff() == 0.0);
  CHECK((u.torso_pose - c.torso_pose).cwiseAbs().maxCoeff() == 0.0);
  CHECK(u.kp_rays.cwiseAbs().maxCoeff() == 0.0);
  CHECK(u.img_feat.cwiseAbs().maxCoeff() == 0.0);
  const ConditionSet uu = make_uncond_condition(u);
  CHECK((uu.bbox - u.bbox).cwiseAbs().maxCoeff() == 0.0);
  CHECK((uu.kp_rays - u.kp_rays).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cfg_velocity interpolation") {
  Rng rng(64);
  const Eigen::MatrixXd vc = random_latent(rng, 4);
  const Eigen::MatrixXd vu = random_latent(rng, 4);
  CHECK((cfg_velocity(vc, vu, 1.0) - vc).cwiseAbs().maxCoeff() == 0.0);
  CHECK((cfg_velocity(vc, Eigen::MatrixXd::Zero(4, kFrameWidth), 1.5) - 1.5 * vc)
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  CHECK((cfg_velocity(vc, vu, 0.0) - vu).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(cfg_velocity(vc, vu, -0.1), std::invalid_argument);
}

TEST_CASE("sampler with the zero field returns noise on generated coords, anchor elsewhere") {
  Rng rng(65);
  const KnownMask mask = KnownMask::standard(LatentLayout::standard());
  CompositeLatent anchor;
  anchor.data = random_latent(rng, 7);
  const ConditionSet cond = ConditionSet::zeros(7, 22 * ray_embedding_dim());
  const LambdaField zero_field([](const Eigen::MatrixXd& z, double, const ConditionSet&) {
    return Eigen::MatrixXd::Zero(z.rows(), z.cols());
  });

  for (int steps : {1, 3, 20}) {
    Rng sample_rng(777);
    Rng noise_rng(777);
    const Eigen::MatrixXd eps = sample_source_noise(noise_rng, 7, NoiseSpec{},
                                                    LatentLayout::standard());
    const CompositeLatent out = sample(zero_field, anchor, mask, cond,
                                       SampleOptions{steps, 1.5}, NoiseSpec{}, sample_rng);
    for (int c = 0; c < kFrameWidth; ++c) {
      const Eigen::VectorXd expect = mask.mask(c) != 0.0 ? Eigen::VectorXd(eps.col(c))
                                                        : Eigen::VectorXd(anchor.data.col(c));
      CHECK((out.data.col(c) - expect).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("sampler is exact for a constant field at any step count") {
  Rng rng(66);
  const KnownMask mask = KnownMask::standard(LatentLayout::standard());
  CompositeLatent anchor;
  anchor.data = random_latent(rng, 5);
  CompositeLatent target;
  target.data = random_latent(rng, 5);
  const ConditionSet cond = ConditionSet::zeros(5, 22 * ray_embedding_dim());

  for (int steps : {1, 5, 50}) {
    Rng noise_rng(4242);
    const Eigen::MatrixXd eps =
        sample_source_noise(noise_rng, 5, NoiseSpec{}, LatentLayout::standard());
    const Eigen::MatrixXd field = target.data - eps;
    const LambdaField constant_field(
        [&field](const Eigen::MatrixXd&, double, const ConditionSet&) { return field; });
    Rng sample_rng(4242);
    const CompositeLatent out = sample(constant_field, anchor, mask, cond,
                                       SampleOptions{steps, 1.5}, NoiseSpec{}, sample_rng);
    for (int c = 0; c < kFrameWidth; ++c) {
      if (mask.mask(c) != 0.0) {
        CHECK((out.data.col(c) - target.data.col(c)).cwiseAbs().maxCoeff() < 1e-6);
      } else {
        CHECK((out.data.col(c) - anchor.data.col(c)).cwiseAbs().maxCoeff() == 0.0);
      }
    }
  }
}

TEST_CASE("sampler preserves anchored coordinates bit-exactly for any setting") {
  Rng rng(67);
  const KnownMask mask = KnownMask::standard(LatentLayout::standard());
  CompositeLatent anchor;
  anchor.data = random_latent(rng, 6);
  const ConditionSet cond = ConditionSet::zeros(6, 22 * ray_embedding_dim());
  const LambdaField field([&rng](const Eigen::MatrixXd& z, double t, const ConditionSet&) {
    return Eigen::MatrixXd((0.3 * z).array() + t);
  });
  for (int steps : {1, 4, 17}) {
    for (double scale : {0.5, 1.0, 1.75}) {
      Rng sample_rng(steps * 100 + static_cast<int>(scale * 4));
      const CompositeLatent out =
          sample(field, anchor, mask, cond, SampleOptions{steps, scale}, NoiseSpec{}, sample_rng);
      for (int c = 0; c < kFrameWidth; ++c) {
        if (mask.mask(c) == 0.0) {
          CHECK((out.data.col(c) - anchor.data.col(c)).cwiseAbs().maxCoeff() == 0.0);
        }
      }
    }
  }
  CHECK_THROWS_AS(sample(field, anchor, mask, cond, SampleOptions{0, 1.5}, NoiseSpec{}, rng),
                  std::invalid_argument);
}

TEST_CASE("masked_path agrees with an Euler update under the exact velocity") {
  Rng rng(68);
  const KnownMask mask = KnownMask::standard(LatentLayout::standard());
  CompositeLatent z;
  z.data = random_latent(rng, 4);
  const Eigen::MatrixXd eps = random_latent(rng, 4);
  const Eigen::MatrixXd v = z.data - eps;
  const double t = 0.37, dt = 0.21;
  const CompositeLatent zt = masked_path(z, eps, mask, t);
  const CompositeLatent zt_next = masked_path(z, eps, mask, t + dt);
  Eigen::MatrixXd euler = zt.data;
  for (int c = 0; c < kFrameWidth; ++c) {
    if (mask.mask(c) != 0.0) euler.col(c) += dt * v.col(c);
  }
  CHECK((euler - zt_next.data).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sampler reports divergence with the step index") {
  Rng rng(69);
  const KnownMask mask = KnownMask::standard(LatentLayout::standard());
  CompositeLatent anchor;
  anchor.data = random_latent(rng, 3);
  const ConditionSet cond = ConditionSet::zeros(3, 22 * ray_embedding_dim());
  const LambdaField nan_field([](const Eigen::MatrixXd& z, double, const ConditionSet&) {
    return Eigen::MatrixXd::Constant(z.rows(), z.cols(), std::nan(""));
  });
  try {
    Rng sample_rng(1);
    sample(nan_field, anchor, mask, cond, SampleOptions{5, 1.5}, NoiseSpec{}, sample_rng);
    CHECK(false);
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("step 0") != std::string::npos);
  }
}

TEST_CASE("sampling is deterministic in (seed, steps, scale)") {
  Rng rng(70);
  const KnownMask mask = KnownMask::standard(LatentLayout::standard());
  CompositeLatent anchor;
  anchor.data = random_latent(rng, 5);
  const ConditionSet cond = ConditionSet::zeros(5, 22 * ray_embedding_dim());
  const LambdaField field([](const Eigen::MatrixXd& z, double t, const ConditionSet&) {
    return Eigen::MatrixXd((-0.5 * z).array() + 0.1 * t);
  });
  Rng r1(31337), r2(31337);
  const CompositeLatent a =
      sample(field, anchor, mask, cond, SampleOptions{13, 1.25}, NoiseSpec{}, r1);
  const CompositeLatent b =
      sample(field, anchor, mask, cond, SampleOptions{13, 1.25}, NoiseSpec{}, r2);
  CHECK((a.data - b.data).cwiseAbs().maxCoeff() == 0.0);
}
