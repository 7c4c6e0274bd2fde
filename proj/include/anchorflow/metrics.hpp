// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <map>
#include <string>
#include <vector>

#include "anchorflow/losses.hpp"
#include "anchorflow/types.hpp"

namespace anchorflow {

struct AlignmentResult {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

// Least-squares similarity transform mapping Y onto X (minimizes
// sum |s R y_i + t - x_i|^2), reflection-corrected; with_scale=false pins
// s = 1. Throws on degenerate configurations (rank < 2 or N < 3).
AlignmentResult procrustes_align(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                 bool with_scale);

using JointFrames = std::vector<Eigen::MatrixXd>;  // per frame: J x 3, meters

// Root-aligned mean per-joint error; joint 0 is treated as the root.
double mpjpe_mm(const JointFrames& pred, const JointFrames& gt);
// Per-frame similarity alignment before averaging.
double pa_mpjpe_mm(const JointFrames& pred, const JointFrames& gt);
// Root-relative mean per-vertex error; roots are supplied by the caller.
double pve_mm(const JointFrames& pred_verts, const JointFrames& gt_verts,
              const std::vector<Eigen::Vector3d>& pred_root,
              const std::vector<Eigen::Vector3d>& gt_root);

// World errors over consecutive chunks: the first aligns each full chunk
// rigidly, the second aligns on the first two frames only and therefore
// penalizes drift. Trailing chunks shorter than 2 frames are dropped.
struct ChunkMetrics {
  double wa_mpjpe_mm = 0.0;
  double w_mpjpe_mm = 0.0;
};
ChunkMetrics chunk_world_metrics(const JointFrames& pred, const JointFrames& gt, int chunk_size,
                                 bool with_scale = false);

// Root translation error after rigid alignment, as a percentage of the total
// ground-truth path length. Throws UndefinedMetricError on a static path.
double rte_percent(const std::vector<Eigen::Vector3d>& pred_tau,
                   const std::vector<Eigen::Vector3d>& gt_tau);

// Mean third-difference magnitude, scaled to m/s^3.
double jitter_m_s3(const JointFrames& joints, double fps);

struct FootSlidingResult {
  double mm = 0.0;
  bool has_contacts = false;
};
// Contacts detected on the ground truth (speed and height thresholds);
// reports the predicted horizontal displacement across contact pairs.
FootSlidingResult foot_sliding_mm(const JointFrames& pred_feet, const JointFrames& gt_feet,
                                  double v_thresh_m = 0.005, double h_thresh_m = 0.05);

struct RegionalSummary {
  double anchor_mean = 0.0;
  double distal_mean = 0.0;
  double gap = 0.0;
};
// Arithmetic means over the available joints of each group; joints missing
// from the map are skipped.
RegionalSummary regional_breakdown(const std::map<std::string, double>& per_joint_mm,
                                   const std::vector<std::string>& anchor_group,
                                   const std::vector<std::string>& distal_group);

// Reads a JSON fixture of per-dataset regional summaries, averages across
// datasets and rounds to 2 decimals (reporting convention).
RegionalSummary ingest_regional_fixture(const std::string& path);

struct SequenceMetrics {
  double mpjpe = 0.0, pa_mpjpe = 0.0, pve = 0.0, non_torso_mpjpe = 0.0;
  double wa_mpjpe = 0.0, w_mpjpe = 0.0, rte = 0.0, jitter = 0.0, foot_sliding = 0.0;
  bool foot_contacts = false;
  std::map<std::string, double> per_joint;
  RegionalSummary regional;
};

struct MetricOptions {
  int chunk_size = 100;
  bool align_with_scale = false;
  double contact_v_thresh = 0.005;
  double contact_h_thresh = 0.05;
  double fps = 30.0;
};

SequenceMetrics evaluate_sequence(const MotionSequence& pred, const MotionSequence& gt,
                                  const SequenceContext& ctx, const MetricOptions& opts);

SequenceMetrics aggregate_metrics(const std::vector<SequenceMetrics>& rows);

void write_metrics_csv(const std::string& path, const std::vector<SequenceMetrics>& rows,
                       const SequenceMetrics& aggregate, const std::string& config_hash);
void write_metrics_json(const std::string& path, const std::vector<SequenceMetrics>& rows,
                        const SequenceMetrics& aggregate, const std::string& config_hash);

}  // namespace anchorflow
