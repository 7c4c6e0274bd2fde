// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <array>
#include <string>
#include <vector>

#include "anchorflow/camera.hpp"
#include "anchorflow/rng.hpp"
#include "anchorflow/types.hpp"

namespace anchorflow {

struct OcclusionSpec {
  double joint_dropout = 0.15;  // per-joint Bernoulli miss probability
  int occluder_count = 1;       // axis-aligned square patches, fixed per sequence
  double occluder_size = 80.0;  // pixels
};

// Parameters of one generated sequence: a sinusoidal gait walking along an
// integrated heading, plus the observation corruption model.
struct MotionSpec {
  int n_frames = 120;
  double fps = 30.0;
  double stride = 0.6;     // meters per step
  double cadence = 1.6;    // steps per second
  double arm_swing = 0.5;  // radians
  double turn_rate = 0.0;  // radians per second
  double shape_range = 1.5;
  OcclusionSpec occlusion;
  double pixel_noise = 2.0;  // pixels, Gaussian on observed keypoints
};

// World-space gait; camera-space fields are left at identity until a camera
// is applied. Legs and arms are phase-offset sinusoids at the cadence, the
// root advances stride*cadence/fps per frame along the integrated heading,
// and all joint angles stay within |aa| <= 2.5.
MotionSequence generate_motion(Rng& rng, const MotionSpec& spec, const BodyShape& shape);

// Fills gamma_c / tau_c by composing the world fields with camera poses.
void apply_camera(MotionSequence& seq, const std::vector<CameraPose>& poses);

struct ObservationSequence {
  ConditionSet cond;         // torso_pose stays zero
  Eigen::MatrixXd kp2d;      // T x 44 noisy pixels, zero where invisible
  Eigen::MatrixXd visibility;  // T x 22 in {0,1}
};

// Projects ground-truth joints, applies pixel noise, per-joint dropout and
// block occluders, and encodes the surviving keypoints as ray embeddings.
// Invisible joints never leak coordinates into any channel.
ObservationSequence generate_observations(const MotionSequence& seq, const Intrinsics& k,
                                          const std::vector<CameraPose>& poses,
                                          const MotionSpec& spec, Rng& rng);

struct DatasetRecord {
  MotionSequence gt;
  Intrinsics intrinsics;
  std::vector<CameraPose> cam_poses;
  ConditionSet obs;
  Eigen::MatrixXd kp2d;        // empty for prediction files
  Eigen::MatrixXd visibility;  // empty for prediction files
  uint64_t seed = 0;
  bool has_obs = true;
};

// Ranges from which per-record gait/camera parameters are drawn.
struct DatasetSpec {
  int n_frames = 120;
  double fps = 30.0;
  std::array<double, 2> stride{0.4, 0.8};
  std::array<double, 2> cadence{1.2, 2.0};
  std::array<double, 2> arm_swing{0.3, 0.7};
  std::array<double, 2> turn{-0.4, 0.4};
  double shape_range = 1.5;
  OcclusionSpec occlusion;
  double pixel_noise = 2.0;
  Intrinsics intrinsics;
  std::array<double, 2> cam_distance{3.5, 5.5};
  std::array<double, 2> cam_elevation{0.1, 0.45};
  double cam_yaw_range = 0.08;
  double cam_pitch_range = 0.05;
  double cam_roll_range = 0.03;
  double cam_transl_range = 0.25;

  std::string canonical() const;  // stable string for hashing
  MotionSpec draw_motion_spec(Rng& rng) const;
};

// Deterministic per seed. All payloads are rounded to the f32 grid used by
// the file format, so a write/read round trip is bit-identical.
DatasetRecord generate_record(uint64_t seed, const DatasetSpec& spec);
std::vector<DatasetRecord> generate_dataset(uint64_t root_seed, int count, const DatasetSpec& spec);

// Re-derives observations for an existing record with a modified corruption
// model (used for occlusion sweeps at evaluation time).
ObservationSequence regenerate_observations(const DatasetRecord& record, const OcclusionSpec& occ,
                                            double pixel_noise, uint64_t seed);

}  // namespace anchorflow
