// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include "anchorflow/metrics.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "anchorflow/errors.hpp"
#include "anchorflow/version.hpp"

#include "json.hpp"

namespace anchorflow {

AlignmentResult procrustes_align(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                 bool with_scale) {
  if (x.rows() != y.rows() || x.cols() != 3 || y.cols() != 3) {
    throw std::invalid_argument("procrustes_align: shape mismatch");
  }
  const int n = static_cast<int>(x.rows());
  if (n < 3) throw std::invalid_argument("procrustes_align: need at least 3 points");
  const Eigen::RowVector3d mx = x.colwise().mean();
  const Eigen::RowVector3d my = y.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - mx;
  const Eigen::MatrixXd yc = y.rowwise() - my;
  const Eigen::Matrix3d cov = xc.transpose() * yc / n;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (sv(1) <= 1e-12 * std::max(sv(0), 1e-300)) {
    throw std::invalid_argument("procrustes_align: degenerate configuration");
  }
  Eigen::Vector3d sgn = Eigen::Vector3d::Ones();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) sgn(2) = -1.0;

  AlignmentResult out;
  out.rotation = svd.matrixU() * sgn.asDiagonal() * svd.matrixV().transpose();
  if (with_scale) {
    const double var_y = yc.squaredNorm() / n;
    out.scale = sv.dot(sgn) / var_y;
    if (!(out.scale > 0.0)) throw std::invalid_argument("procrustes_align: non-positive scale");
  }
  out.translation = mx.transpose() - out.scale * out.rotation * my.transpose();
  return out;
}

namespace {

void check_frames(const JointFrames& pred, const JointFrames& gt, const char* what) {
  if (pred.size() != gt.size() || pred.empty()) {
    throw std::invalid_argument(std::string(what) + ": frame count mismatch");
  }
  for (size_t t = 0; t < pred.size(); ++t) {
    if (pred[t].rows() != gt[t].rows() || pred[t].cols() != 3 || gt[t].cols() != 3) {
      throw std::invalid_argument(std::string(what) + ": joint shape mismatch");
    }
  }
}

Eigen::MatrixXd stack_frames(const JointFrames& frames, int begin, int count) {
  const int j = static_cast<int>(frames[begin].rows());
  Eigen::MatrixXd out(count * j, 3);
  for (int t = 0; t < count; ++t) out.middleRows(t * j, j) = frames[begin + t];
  return out;
}

double mean_error_after(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt,
                        const AlignmentResult& a) {
  double sum = 0.0;
  for (int i = 0; i < pred.rows(); ++i) {
    const Eigen::Vector3d p =
        a.scale * a.rotation * pred.row(i).transpose() + a.translation;
    sum += (p - gt.row(i).transpose()).norm();
  }
  return sum / pred.rows();
}

}  // namespace

double mpjpe_mm(const JointFrames& pred, const JointFrames& gt) {
  check_frames(pred, gt, "mpjpe");
  double sum = 0.0;
  long count = 0;
  for (size_t t = 0; t < pred.size(); ++t) {
    const Eigen::RowVector3d rp = pred[t].row(0);
    const Eigen::RowVector3d rg = gt[t].row(0);
    for (int j = 0; j < pred[t].rows(); ++j) {
      sum += ((pred[t].row(j) - rp) - (gt[t].row(j) - rg)).norm();
      ++count;
    }
  }
  return 1000.0 * sum / count;
}

double pa_mpjpe_mm(const JointFrames& pred, const JointFrames& gt) {
  check_frames(pred, gt, "pa_mpjpe");
  double sum = 0.0;
  for (size_t t = 0; t < pred.size(); ++t) {
    const AlignmentResult a = procrustes_align(gt[t], pred[t], true);
    sum += mean_error_after(pred[t], gt[t], a);
  }
  return 1000.0 * sum / pred.size();
}

double pve_mm(const JointFrames& pred_verts, const JointFrames& gt_verts,
              const std::vector<Eigen::Vector3d>& pred_root,
              const std::vector<Eigen::Vector3d>& gt_root) {
  check_frames(pred_verts, gt_verts, "pve");
  double sum = 0.0;
  long count = 0;
  for (size_t t = 0; t < pred_verts.size(); ++t) {
    for (int v = 0; v < pred_verts[t].rows(); ++v) {
      const Eigen::Vector3d p = pred_verts[t].row(v).transpose() - pred_root[t];
      const Eigen::Vector3d g = gt_verts[t].row(v).transpose() - gt_root[t];
      sum += (p - g).norm();
      ++count;
    }
  }
  return 1000.0 * sum / count;
}

ChunkMetrics chunk_world_metrics(const JointFrames& pred, const JointFrames& gt, int chunk_size,
                                 bool with_scale) {
  check_frames(pred, gt, "chunk_world_metrics");
  const int frames = static_cast<int>(pred.size());
  if (frames < 2) throw std::invalid_argument("chunk_world_metrics: need at least 2 frames");
  if (chunk_size < 2) throw std::invalid_argument("chunk_world_metrics: chunk_size too small");

  double wa_sum = 0.0, w_sum = 0.0;
  int chunks = 0;
  for (int begin = 0; begin < frames; begin += chunk_size) {
    const int count = std::min(chunk_size, frames - begin);
    if (count < 2) break;  // drop sub-2-frame tails
    const Eigen::MatrixXd pc = stack_frames(pred, begin, count);
    const Eigen::MatrixXd gc = stack_frames(gt, begin, count);
    const AlignmentResult full = procrustes_align(gc, pc, with_scale);
    wa_sum += mean_error_after(pc, gc, full);
    const Eigen::MatrixXd p2 = stack_frames(pred, begin, 2);
    const Eigen::MatrixXd g2 = stack_frames(gt, begin, 2);
    const AlignmentResult head = procrustes_align(g2, p2, with_scale);
    w_sum += mean_error_after(pc, gc, head);
    ++chunks;
  }
  return {1000.0 * wa_sum / chunks, 1000.0 * w_sum / chunks};
}

double rte_percent(const std::vector<Eigen::Vector3d>& pred_tau,
                   const std::vector<Eigen::Vector3d>& gt_tau) {
  if (pred_tau.size() != gt_tau.size() || pred_tau.empty()) {
    throw std::invalid_argument("rte: length mismatch");
  }
  const int n = static_cast<int>(pred_tau.size());
  double path = 0.0;
  for (int t = 0; t + 1 < n; ++t) path += (gt_tau[t + 1] - gt_tau[t]).norm();
  if (path <= 0.0) throw UndefinedMetricError("rte: ground-truth path has zero displacement");

  Eigen::MatrixXd p(n, 3), g(n, 3);
  for (int t = 0; t < n; ++t) {
    p.row(t) = pred_tau[t].transpose();
    g.row(t) = gt_tau[t].transpose();
  }
  const AlignmentResult a = procrustes_align(g, p, false);
  const double mean_err = mean_error_after(p, g, a);
  return 100.0 * mean_err / path;
}

double jitter_m_s3(const JointFrames& joints, double fps) {
  if (joints.size() < 4) throw std::invalid_argument("jitter: need at least 4 frames");
  const int frames = static_cast<int>(joints.size());
  const int j = static_cast<int>(joints[0].rows());
  double sum = 0.0;
  long count = 0;
  for (int t = 1; t + 2 < frames; ++t) {
    const Eigen::MatrixXd d =
        joints[t + 2] - 3.0 * joints[t + 1] + 3.0 * joints[t] - joints[t - 1];
    for (int r = 0; r < j; ++r) {
      sum += d.row(r).norm();
      ++count;
    }
  }
  return sum / count * fps * fps * fps;
}

FootSlidingResult foot_sliding_mm(const JointFrames& pred_feet, const JointFrames& gt_feet,
                                  double v_thresh_m, double h_thresh_m) {
  check_frames(pred_feet, gt_feet, "foot_sliding");
  const int frames = static_cast<int>(gt_feet.size());
  const int feet = static_cast<int>(gt_feet[0].rows());

  double floor_y = 1e300;
  for (const auto& f : gt_feet) floor_y = std::min(floor_y, f.col(1).minCoeff());

  FootSlidingResult out;
  double sum = 0.0;
  long pairs = 0;
  for (int f = 0; f < feet; ++f) {
    std::vector<bool> contact(frames, false);
    for (int t = 0; t < frames; ++t) {
      const int t1 = std::min(t + 1, frames - 1);
      const int t0 = (t1 == t) ? t - 1 : t;
      const double speed = (gt_feet[t1].row(f) - gt_feet[t0].row(f)).norm();
      const double height = gt_feet[t](f, 1) - floor_y;
      contact[t] = speed < v_thresh_m && height < h_thresh_m;
    }
    for (int t = 0; t + 1 < frames; ++t) {
      if (!contact[t] || !contact[t + 1]) continue;
      const double dx = pred_feet[t + 1](f, 0) - pred_feet[t](f, 0);
      const double dz = pred_feet[t + 1](f, 2) - pred_feet[t](f, 2);
      sum += std::sqrt(dx * dx + dz * dz);
      ++pairs;
    }
  }
  if (pairs == 0) return {0.0, false};
  return {1000.0 * sum / pairs, true};
}

RegionalSummary regional_breakdown(const std::map<std::string, double>& per_joint_mm,
                                   const std::vector<std::string>& anchor_group,
                                   const std::vector<std::string>& distal_group) {
  if (anchor_group.empty() || distal_group.empty()) {
    throw std::invalid_argument("regional_breakdown: empty group");
  }
  const auto group_mean = [&per_joint_mm](const std::vector<std::string>& names) {
    double sum = 0.0;
    int count = 0;
    for (const auto& n : names) {
      const auto it = per_joint_mm.find(n);
      if (it == per_joint_mm.end()) continue;  // absent joints are skipped
      sum += it->second;
      ++count;
    }
    if (count == 0) throw std::invalid_argument("regional_breakdown: no joints found for group");
    return sum / count;
  };
  RegionalSummary out;
  out.anchor_mean = group_mean(anchor_group);
  out.distal_mean = group_mean(distal_group);
  out.gap = out.distal_mean - out.anchor_mean;
  return out;
}

RegionalSummary ingest_regional_fixture(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("regional fixture: cannot open " + path);
  nlohmann::json doc = nlohmann::json::parse(f, nullptr, false);
  if (doc.is_discarded()) throw FormatError("regional fixture: invalid JSON");
  double anchor = 0.0, distal = 0.0;
  int count = 0;
  for (const auto& row : doc.at("datasets")) {
    anchor += row.at("anchor_mean").get<double>();
    distal += row.at("distal_mean").get<double>();
    ++count;
  }
  if (count == 0) throw FormatError("regional fixture: no datasets");
  const auto round2 = [](double v) { return std::round(v * 100.0) / 100.0; };
  RegionalSummary out;
  out.anchor_mean = round2(anchor / count);
  out.distal_mean = round2(distal / count);
  out.gap = round2(distal / count - anchor / count);
  return out;
}

SequenceMetrics evaluate_sequence(const MotionSequence& pred, const MotionSequence& gt,
                                  const SequenceContext& ctx, const MetricOptions& opts) {
  if (pred.size() != gt.size() || pred.empty()) {
    throw std::invalid_argument("evaluate_sequence: length mismatch");
  }
  const Skeleton& skel = *ctx.skel;
  const int frames = static_cast<int>(pred.size());

  JointFrames pj(frames), gj(frames), pw(frames), gw(frames), pv(frames), gv(frames);
  JointFrames pfeet(frames), gfeet(frames);
  std::vector<Eigen::Vector3d> proot(frames), groot(frames), ptau(frames), gtau(frames);
  const int lfoot = skel.joint_index("left_foot");
  const int rfoot = skel.joint_index("right_foot");
  for (int t = 0; t < frames; ++t) {
    const auto jp = forward_kinematics(camera_pose_of(pred[t]), BodyShape{pred[t].beta}, skel);
    const auto jg = forward_kinematics(camera_pose_of(gt[t]), BodyShape{gt[t].beta}, skel);
    const auto wp = forward_kinematics(world_pose_of(pred[t]), BodyShape{pred[t].beta}, skel);
    const auto wg = forward_kinematics(world_pose_of(gt[t]), BodyShape{gt[t].beta}, skel);
    pj[t].resize(kNumJoints, 3);
    gj[t].resize(kNumJoints, 3);
    pw[t].resize(kNumJoints, 3);
    gw[t].resize(kNumJoints, 3);
    for (int j = 0; j < kNumJoints; ++j) {
      pj[t].row(j) = jp[j].transpose();
      gj[t].row(j) = jg[j].transpose();
      pw[t].row(j) = wp[j].transpose();
      gw[t].row(j) = wg[j].transpose();
    }
    proot[t] = jp[0];
    groot[t] = jg[0];
    ptau[t] = pred[t].tau_w;
    gtau[t] = gt[t].tau_w;
    pfeet[t].resize(2, 3);
    gfeet[t].resize(2, 3);
    pfeet[t].row(0) = wp[lfoot].transpose();
    pfeet[t].row(1) = wp[rfoot].transpose();
    gfeet[t].row(0) = wg[lfoot].transpose();
    gfeet[t].row(1) = wg[rfoot].transpose();
    if (ctx.mesh != nullptr) {
      pv[t] = lbs_vertices(camera_pose_of(pred[t]), BodyShape{pred[t].beta}, *ctx.mesh, skel);
      gv[t] = lbs_vertices(camera_pose_of(gt[t]), BodyShape{gt[t].beta}, *ctx.mesh, skel);
    }
  }

  SequenceMetrics m;
  m.mpjpe = mpjpe_mm(pj, gj);
  m.pa_mpjpe = pa_mpjpe_mm(pj, gj);
  if (ctx.mesh != nullptr) m.pve = pve_mm(pv, gv, proot, groot);
  const ChunkMetrics cm = chunk_world_metrics(pw, gw, opts.chunk_size, opts.align_with_scale);
  m.wa_mpjpe = cm.wa_mpjpe_mm;
  m.w_mpjpe = cm.w_mpjpe_mm;
  m.rte = rte_percent(ptau, gtau);
  m.jitter = jitter_m_s3(pw, opts.fps);
  const FootSlidingResult fs =
      foot_sliding_mm(pfeet, gfeet, opts.contact_v_thresh, opts.contact_h_thresh);
  m.foot_sliding = fs.mm;
  m.foot_contacts = fs.has_contacts;

  for (int j = 0; j < kNumJoints; ++j) {
    double sum = 0.0;
    for (int t = 0; t < frames; ++t) {
      sum += ((pj[t].row(j) - pj[t].row(0)) - (gj[t].row(j) - gj[t].row(0))).norm();
    }
    m.per_joint[skel.joint_names[j]] = 1000.0 * sum / frames;
  }
  const Partition& part = *ctx.part;
  double nt_sum = 0.0;
  for (int id : part.non_torso_ids) nt_sum += m.per_joint.at(skel.joint_names[id]);
  m.non_torso_mpjpe = nt_sum / part.non_torso_ids.size();

  std::vector<std::string> anchor_names = {skel.joint_names[0]};
  for (int id : part.torso_ids) anchor_names.push_back(skel.joint_names[id]);
  std::vector<std::string> distal_names;
  for (int id : part.non_torso_ids) distal_names.push_back(skel.joint_names[id]);
  m.regional = regional_breakdown(m.per_joint, anchor_names, distal_names);
  return m;
}

SequenceMetrics aggregate_metrics(const std::vector<SequenceMetrics>& rows) {
  if (rows.empty()) throw std::invalid_argument("aggregate_metrics: no rows");
  SequenceMetrics agg;
  for (const auto& r : rows) {
    agg.mpjpe += r.mpjpe;
    agg.pa_mpjpe += r.pa_mpjpe;
    agg.pve += r.pve;
    agg.non_torso_mpjpe += r.non_torso_mpjpe;
    agg.wa_mpjpe += r.wa_mpjpe;
    agg.w_mpjpe += r.w_mpjpe;
    agg.rte += r.rte;
    agg.jitter += r.jitter;
    agg.foot_sliding += r.foot_sliding;
    agg.foot_contacts = agg.foot_contacts || r.foot_contacts;
    for (const auto& [k, v] : r.per_joint) agg.per_joint[k] += v;
  }
  const double n = static_cast<double>(rows.size());
  agg.mpjpe /= n;
  agg.pa_mpjpe /= n;
  agg.pve /= n;
  agg.non_torso_mpjpe /= n;
  agg.wa_mpjpe /= n;
  agg.w_mpjpe /= n;
  agg.rte /= n;
  agg.jitter /= n;
  agg.foot_sliding /= n;
  for (auto& [k, v] : agg.per_joint) v /= n;

  const Skeleton& skel = Skeleton::standard();
  const Partition& part = Partition::standard();
  std::vector<std::string> anchor_names = {skel.joint_names[0]};
  for (int id : part.torso_ids) anchor_names.push_back(skel.joint_names[id]);
  std::vector<std::string> distal_names;
  for (int id : part.non_torso_ids) distal_names.push_back(skel.joint_names[id]);
  agg.regional = regional_breakdown(agg.per_joint, anchor_names, distal_names);
  return agg;
}

namespace {

void metrics_header(std::ostream& os) {
  os << "seq,mpjpe_mm,pa_mpjpe_mm,pve_mm,non_torso_mpjpe_mm,wa_mpjpe_mm,w_mpjpe_mm,rte_pct,"
        "jitter_m_s3,foot_sliding_mm,foot_contacts,anchor_mean_mm,distal_mean_mm,regional_gap_mm";
  for (const auto& n : Skeleton::standard().joint_names) os << ",pj_" << n;
  os << "\n";
}

void metrics_row(std::ostream& os, const std::string& id, const SequenceMetrics& m) {
  os << id << "," << m.mpjpe << "," << m.pa_mpjpe << "," << m.pve << "," << m.non_torso_mpjpe << ","
     << m.wa_mpjpe << "," << m.w_mpjpe << "," << m.rte << "," << m.jitter << "," << m.foot_sliding
     << "," << (m.foot_contacts ? 1 : 0) << "," << m.regional.anchor_mean << ","
     << m.regional.distal_mean << "," << m.regional.gap;
  for (const auto& n : Skeleton::standard().joint_names) {
    os << "," << (m.per_joint.count(n) ? m.per_joint.at(n) : 0.0);
  }
  os << "\n";
}

nlohmann::json metrics_json(const SequenceMetrics& m) {
  nlohmann::json j;
  j["mpjpe_mm"] = m.mpjpe;
  j["pa_mpjpe_mm"] = m.pa_mpjpe;
  j["pve_mm"] = m.pve;
  j["non_torso_mpjpe_mm"] = m.non_torso_mpjpe;
  j["wa_mpjpe_mm"] = m.wa_mpjpe;
  j["w_mpjpe_mm"] = m.w_mpjpe;
  j["rte_pct"] = m.rte;
  j["jitter_m_s3"] = m.jitter;
  j["foot_sliding_mm"] = m.foot_sliding;
  j["foot_contacts"] = m.foot_contacts;
  j["per_joint_mm"] = m.per_joint;
  j["regional"] = {{"anchor_mean_mm", m.regional.anchor_mean},
                   {"distal_mean_mm", m.regional.distal_mean},
                   {"gap_mm", m.regional.gap}};
  return j;
}

}  // namespace

void write_metrics_csv(const std::string& path, const std::vector<SequenceMetrics>& rows,
                       const SequenceMetrics& aggregate, const std::string& config_hash) {
  std::ofstream os(path);
  if (!os) throw FormatError("metrics: cannot open " + path + " for writing");
  os.precision(9);
  os << "# tool_version=" << kToolVersion << " config_hash=" << config_hash << "\n";
  metrics_header(os);
  for (size_t i = 0; i < rows.size(); ++i) metrics_row(os, std::to_string(i), rows[i]);
  metrics_row(os, "aggregate", aggregate);
}

void write_metrics_json(const std::string& path, const std::vector<SequenceMetrics>& rows,
                        const SequenceMetrics& aggregate, const std::string& config_hash) {
  nlohmann::json doc;
  doc["tool_version"] = kToolVersion;
  doc["config_hash"] = config_hash;
  doc["sequences"] = nlohmann::json::array();
  for (const auto& r : rows) doc["sequences"].push_back(metrics_json(r));
  doc["aggregate"] = metrics_json(aggregate);
  std::ofstream os(path);
  if (!os) throw FormatError("metrics: cannot open " + path + " for writing");
  os << doc.dump(2) << "\n";
}

}  // namespace anchorflow
