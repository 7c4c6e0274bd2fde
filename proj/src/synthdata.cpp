// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include "anchorflow/synthdata.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "anchorflow/geometry.hpp"

namespace anchorflow {

namespace {

double wrap_pi(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

double q32(double x) { return static_cast<double>(static_cast<float>(x)); }

template <typename Mat>
void quantize(Mat& m) {
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) m(r, c) = q32(m(r, c));
  }
}

template <typename Vec>
void quantize_vec(Vec& v) {
  for (int i = 0; i < v.size(); ++i) v(i) = q32(v(i));
}

// Fixed random projection shared by every dataset; a stand-in for a learned
// image backbone.
const Eigen::MatrixXd& image_feature_projection() {
  static const Eigen::MatrixXd p = [] {
    Rng rng(0xace0fba5eull);
    Eigen::MatrixXd m(kImgFeatDim, 2 * kNumJoints);
    const double scale = 1.0 / std::sqrt(static_cast<double>(2 * kNumJoints));
    for (int r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < m.cols(); ++c) m(r, c) = scale * rng.normal();
    }
    return m;
  }();
  return p;
}

}  // namespace

MotionSequence generate_motion(Rng& rng, const MotionSpec& spec, const BodyShape& shape) {
  if (spec.n_frames < 2) throw std::invalid_argument("generate_motion: n_frames must be >= 2");
  if (spec.occlusion.joint_dropout < 0.0 || spec.occlusion.joint_dropout > 1.0) {
    throw std::invalid_argument("generate_motion: dropout outside [0,1]");
  }
  const Skeleton& skel = Skeleton::standard();

  const double heading0 = rng.uniform(-M_PI, M_PI);
  const double phase0 = rng.uniform(0.0, 2.0 * M_PI);
  const double x0 = rng.uniform(-0.5, 0.5);
  const double z0 = rng.uniform(-0.5, 0.5);

  const double leg_len = std::abs(skel.rest_offset[4].y()) + std::abs(skel.rest_offset[7].y());
  const double a_leg = std::asin(std::min(0.9, spec.stride / (2.0 * leg_len)));
  const double a_knee = std::min(1.0, 1.5 * a_leg);
  const double a_arm = spec.arm_swing;
  const double speed = spec.stride * spec.cadence;

  MotionSequence seq(spec.n_frames);
  Eigen::Vector3d root(x0, 0.92, z0);
  for (int t = 0; t < spec.n_frames; ++t) {
    const double sec = t / spec.fps;
    const double p = phase0 + 2.0 * M_PI * spec.cadence * sec;
    const double heading = wrap_pi(heading0 + spec.turn_rate * sec);
    MotionState& s = seq[t];
    s.beta = shape.beta;

    auto aa = [&s](int joint, double x, double y, double z) {
      s.body_pose.row(joint - 1) = Eigen::RowVector3d(x, y, z);
    };
    // Legs swing about the lateral axis, opposite phases.
    aa(1, a_leg * std::sin(p), 0, 0);
    aa(2, a_leg * std::sin(p + M_PI), 0, 0);
    aa(4, a_knee * 0.5 * (1.0 + std::sin(p - M_PI_2)), 0, 0);
    aa(5, a_knee * 0.5 * (1.0 + std::sin(p + M_PI_2)), 0, 0);
    aa(7, 0.15 * std::sin(p + M_PI_2), 0, 0);
    aa(8, 0.15 * std::sin(p - M_PI_2), 0, 0);
    aa(10, 0.05 * std::sin(p), 0, 0);
    aa(11, 0.05 * std::sin(p + M_PI), 0, 0);
    // Arms counter-swing about the vertical axis (the arm chain runs along x).
    aa(16, 0, a_arm * std::sin(p + M_PI), 0);
    aa(17, 0, a_arm * std::sin(p), 0);
    aa(18, 0, 0.4 * a_arm * 0.5 * (1.0 + std::sin(p + M_PI_2)), 0);
    aa(19, 0, 0.4 * a_arm * 0.5 * (1.0 + std::sin(p - M_PI_2)), 0);
    aa(20, 0, 0.1 * a_arm * std::sin(p), 0);
    aa(21, 0, 0.1 * a_arm * std::sin(p + M_PI), 0);
    // Gentle torso counter-motion.
    aa(3, 0, 0, 0.04 * std::sin(p));
    aa(6, 0.03 * std::sin(p + 1.0), 0, 0);
    aa(9, 0, 0, 0.03 * std::sin(p + 2.0));
    aa(12, 0.04 * std::sin(p + 0.7), 0, 0);
    aa(13, 0, 0, 0.02 * std::sin(p));
    aa(14, 0, 0, 0.02 * std::sin(p + M_PI));
    aa(15, 0.05 * std::sin(p + 1.3), 0, 0);

    s.gamma_w = Eigen::Vector3d(0, heading, 0);
    s.tau_w = root + Eigen::Vector3d(0, 0.02 * std::sin(2.0 * p), 0);
    root += (speed / spec.fps) * Eigen::Vector3d(std::sin(heading), 0, std::cos(heading));
  }
  return seq;
}

void apply_camera(MotionSequence& seq, const std::vector<CameraPose>& poses) {
  if (seq.size() != poses.size()) throw std::invalid_argument("apply_camera: length mismatch");
  for (size_t t = 0; t < seq.size(); ++t) {
    const Eigen::Matrix3d rw = axis_angle_to_matrix(seq[t].gamma_w);
    seq[t].gamma_c = matrix_to_axis_angle(poses[t].rotation * rw);
    seq[t].tau_c = poses[t].rotation * seq[t].tau_w + poses[t].translation;
  }
}

ObservationSequence generate_observations(const MotionSequence& seq, const Intrinsics& k,
                                          const std::vector<CameraPose>& poses,
                                          const MotionSpec& spec, Rng& rng) {
  if (seq.size() != poses.size()) {
    throw std::invalid_argument("generate_observations: length mismatch");
  }
  const Skeleton& skel = Skeleton::standard();
  const int frames = static_cast<int>(seq.size());
  const int kp_width = kNumJoints * ray_embedding_dim();

  ObservationSequence out;
  out.cond = ConditionSet::zeros(frames, kp_width);
  out.kp2d = Eigen::MatrixXd::Zero(frames, 2 * kNumJoints);
  out.visibility = Eigen::MatrixXd::Zero(frames, kNumJoints);
  out.cond.rel_cam = relative_camera_features(poses);

  struct Rect {
    double u0, v0, u1, v1;
  };
  std::vector<Rect> occluders;
  for (int i = 0; i < spec.occlusion.occluder_count; ++i) {
    const double u = rng.uniform(0.0, k.width);
    const double v = rng.uniform(0.0, k.height);
    const double h = 0.5 * spec.occlusion.occluder_size;
    occluders.push_back({u - h, v - h, u + h, v + h});
  }

  for (int t = 0; t < frames; ++t) {
    const auto joints = forward_kinematics(camera_pose_of(seq[t]), BodyShape{seq[t].beta}, skel);
    Eigen::Vector2d lo(1e300, 1e300), hi(-1e300, -1e300);
    int visible_count = 0;
    for (int j = 0; j < kNumJoints; ++j) {
      const double drop = rng.uniform();
      bool visible = joints[j].z() > 0.0;
      Eigen::Vector2d u = Eigen::Vector2d::Zero();
      if (visible) {
        u = project(k, joints[j]);
        visible = u.x() >= 0.0 && u.x() <= k.width && u.y() >= 0.0 && u.y() <= k.height;
      }
      if (visible) {
        for (const Rect& r : occluders) {
          if (u.x() >= r.u0 && u.x() <= r.u1 && u.y() >= r.v0 && u.y() <= r.v1) {
            visible = false;
            break;
          }
        }
      }
      if (visible && drop < spec.occlusion.joint_dropout) visible = false;
      if (!visible) continue;

      u.x() += spec.pixel_noise * rng.normal();
      u.y() += spec.pixel_noise * rng.normal();
      out.visibility(t, j) = 1.0;
      out.kp2d(t, 2 * j) = u.x();
      out.kp2d(t, 2 * j + 1) = u.y();
      out.cond.kp_rays.row(t).segment(j * ray_embedding_dim(), ray_embedding_dim()) =
          ray_embedding(k, u, 1.0).transpose();
      lo = lo.cwiseMin(u);
      hi = hi.cwiseMax(u);
      ++visible_count;
    }
    if (visible_count > 0) {
      const Eigen::Vector2d center = 0.5 * (lo + hi);
      const double scale = std::max(hi.x() - lo.x(), hi.y() - lo.y());
      out.cond.bbox(t, 0) = (center.x() - k.cx) / k.fx;
      out.cond.bbox(t, 1) = (center.y() - k.cy) / k.fy;
      out.cond.bbox(t, 2) = scale / k.fx;
    } else if (t > 0) {
      out.cond.bbox.row(t) = out.cond.bbox.row(t - 1);
    }
    Eigen::VectorXd norm_kp = Eigen::VectorXd::Zero(2 * kNumJoints);
    for (int j = 0; j < kNumJoints; ++j) {
      if (out.visibility(t, j) == 0.0) continue;
      norm_kp(2 * j) = (out.kp2d(t, 2 * j) - k.cx) / k.fx;
      norm_kp(2 * j + 1) = (out.kp2d(t, 2 * j + 1) - k.cy) / k.fy;
    }
    out.cond.img_feat.row(t) = (image_feature_projection() * norm_kp).transpose();
  }
  return out;
}

std::string DatasetSpec::canonical() const {
  std::ostringstream os;
  os.precision(12);
  os << "n=" << n_frames << ";fps=" << fps << ";stride=" << stride[0] << "," << stride[1]
     << ";cadence=" << cadence[0] << "," << cadence[1] << ";arm=" << arm_swing[0] << ","
     << arm_swing[1] << ";turn=" << turn[0] << "," << turn[1] << ";shape=" << shape_range
     << ";drop=" << occlusion.joint_dropout << ";occn=" << occlusion.occluder_count
     << ";occs=" << occlusion.occluder_size << ";noise=" << pixel_noise << ";fx=" << intrinsics.fx
     << ";fy=" << intrinsics.fy << ";cx=" << intrinsics.cx << ";cy=" << intrinsics.cy
     << ";w=" << intrinsics.width << ";h=" << intrinsics.height << ";dist=" << cam_distance[0]
     << "," << cam_distance[1] << ";elev=" << cam_elevation[0] << "," << cam_elevation[1]
     << ";cyaw=" << cam_yaw_range << ";cpitch=" << cam_pitch_range << ";croll=" << cam_roll_range
     << ";ct=" << cam_transl_range;
  return os.str();
}

MotionSpec DatasetSpec::draw_motion_spec(Rng& rng) const {
  MotionSpec m;
  m.n_frames = n_frames;
  m.fps = fps;
  m.stride = rng.uniform(stride[0], stride[1]);
  m.cadence = rng.uniform(cadence[0], cadence[1]);
  m.arm_swing = rng.uniform(arm_swing[0], arm_swing[1]);
  m.turn_rate = rng.uniform(turn[0], turn[1]);
  m.shape_range = shape_range;
  m.occlusion = occlusion;
  m.pixel_noise = pixel_noise;
  return m;
}

namespace {

std::vector<CameraPose> sample_record_camera(Rng& rng, const MotionSequence& seq,
                                             const DatasetSpec& spec) {
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& s : seq) centroid += s.tau_w;
  centroid /= static_cast<double>(seq.size());

  const double azimuth = rng.uniform(-M_PI, M_PI);
  const double elevation = rng.uniform(spec.cam_elevation[0], spec.cam_elevation[1]);
  const double distance = rng.uniform(spec.cam_distance[0], spec.cam_distance[1]);
  const Eigen::Vector3d eye =
      centroid + distance * Eigen::Vector3d(std::cos(elevation) * std::sin(azimuth),
                                            std::sin(elevation),
                                            std::cos(elevation) * std::cos(azimuth));
  const Eigen::Vector3d fwd = (centroid - eye).normalized();
  const Eigen::Vector3d right = fwd.cross(Eigen::Vector3d::UnitY()).normalized();
  const Eigen::Vector3d down = fwd.cross(right);
  CameraPose base;
  base.rotation.row(0) = right.transpose();
  base.rotation.row(1) = down.transpose();
  base.rotation.row(2) = fwd.transpose();
  base.translation = -base.rotation * eye;

  TrajectoryBounds bounds;
  bounds.range[0] = {-spec.cam_yaw_range, spec.cam_yaw_range};
  bounds.range[1] = {-spec.cam_pitch_range, spec.cam_pitch_range};
  bounds.range[2] = {-spec.cam_roll_range, spec.cam_roll_range};
  for (int c = 3; c < 6; ++c) bounds.range[c] = {-spec.cam_transl_range, spec.cam_transl_range};
  std::vector<CameraPose> deltas =
      sample_trajectory(rng, static_cast<int>(seq.size()), bounds);

  std::vector<CameraPose> poses(seq.size());
  for (size_t t = 0; t < seq.size(); ++t) {
    poses[t].rotation = deltas[t].rotation * base.rotation;
    poses[t].translation = deltas[t].rotation * base.translation + deltas[t].translation;
  }
  return poses;
}

void quantize_record(DatasetRecord& rec) {
  for (auto& s : rec.gt) {
    quantize(s.body_pose);
    quantize_vec(s.beta);
    quantize_vec(s.gamma_c);
    quantize_vec(s.tau_c);
    quantize_vec(s.gamma_w);
    quantize_vec(s.tau_w);
  }
  rec.intrinsics.fx = q32(rec.intrinsics.fx);
  rec.intrinsics.fy = q32(rec.intrinsics.fy);
  rec.intrinsics.cx = q32(rec.intrinsics.cx);
  rec.intrinsics.cy = q32(rec.intrinsics.cy);
  rec.intrinsics.width = q32(rec.intrinsics.width);
  rec.intrinsics.height = q32(rec.intrinsics.height);
  for (auto& p : rec.cam_poses) {
    quantize(p.rotation);
    quantize_vec(p.translation);
  }
  if (rec.has_obs) {
    quantize(rec.obs.bbox);
    quantize(rec.obs.kp_rays);
    quantize(rec.obs.img_feat);
    quantize(rec.obs.rel_cam);
    quantize(rec.obs.torso_pose);
    quantize(rec.kp2d);
    quantize(rec.visibility);
  }
}

}  // namespace

DatasetRecord generate_record(uint64_t seed, const DatasetSpec& spec) {
  Rng root(seed);
  Rng gait_rng = root.substream("gait");
  Rng shape_rng = root.substream("shape");
  Rng motion_rng = root.substream("motion");
  Rng camera_rng = root.substream("camera");
  Rng obs_rng = root.substream("obs");

  const MotionSpec mspec = spec.draw_motion_spec(gait_rng);
  BodyShape shape;
  for (int i = 0; i < kShapeDims; ++i) {
    shape.beta(i) = shape_rng.uniform(-spec.shape_range, spec.shape_range);
  }

  DatasetRecord rec;
  rec.seed = seed;
  rec.intrinsics = spec.intrinsics;
  rec.gt = generate_motion(motion_rng, mspec, shape);
  rec.cam_poses = sample_record_camera(camera_rng, rec.gt, spec);
  apply_camera(rec.gt, rec.cam_poses);
  ObservationSequence obs =
      generate_observations(rec.gt, rec.intrinsics, rec.cam_poses, mspec, obs_rng);
  rec.obs = std::move(obs.cond);
  rec.kp2d = std::move(obs.kp2d);
  rec.visibility = std::move(obs.visibility);
  rec.has_obs = true;
  quantize_record(rec);
  return rec;
}

std::vector<DatasetRecord> generate_dataset(uint64_t root_seed, int count,
                                            const DatasetSpec& spec) {
  std::vector<DatasetRecord> records;
  records.reserve(count);
  Rng root(root_seed);
  for (int i = 0; i < count; ++i) {
    records.push_back(generate_record(root.substream("record" + std::to_string(i)).seed(), spec));
  }
  return records;
}

ObservationSequence regenerate_observations(const DatasetRecord& record, const OcclusionSpec& occ,
                                            double pixel_noise, uint64_t seed) {
  MotionSpec mspec;
  mspec.n_frames = static_cast<int>(record.gt.size());
  mspec.occlusion = occ;
  mspec.pixel_noise = pixel_noise;
  Rng rng(seed);
  return generate_observations(record.gt, record.intrinsics, record.cam_poses, mspec, rng);
}

}  // namespace anchorflow
