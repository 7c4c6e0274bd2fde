// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include "anchorflow/config.hpp"

#include <zlib.h>

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "anchorflow/errors.hpp"

namespace anchorflow {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

double to_double(const std::string& key, const std::string& v) {
  try {
    return std::stod(v);
  } catch (...) {
    throw std::invalid_argument("config: bad numeric value for " + key + ": " + v);
  }
}

int to_int(const std::string& key, const std::string& v) {
  try {
    return std::stoi(v);
  } catch (...) {
    throw std::invalid_argument("config: bad integer value for " + key + ": " + v);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: bad boolean value for " + key + ": " + v);
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("config: cannot open " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config: line " + std::to_string(lineno) + " is not key = value");
    }
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& v) {
  if (key == "seed") seed = static_cast<uint64_t>(std::stoull(v));
  else if (key == "data.train_path") train_path = v;
  else if (key == "data.eval_path") eval_path = v;
  else if (key == "data.train_count") train_count = to_int(key, v);
  else if (key == "data.eval_count") eval_count = to_int(key, v);
  else if (key == "data.n_frames") data.n_frames = to_int(key, v);
  else if (key == "data.fps") data.fps = to_double(key, v);
  else if (key == "data.stride_min") data.stride[0] = to_double(key, v);
  else if (key == "data.stride_max") data.stride[1] = to_double(key, v);
  else if (key == "data.cadence_min") data.cadence[0] = to_double(key, v);
  else if (key == "data.cadence_max") data.cadence[1] = to_double(key, v);
  else if (key == "data.arm_swing_min") data.arm_swing[0] = to_double(key, v);
  else if (key == "data.arm_swing_max") data.arm_swing[1] = to_double(key, v);
  else if (key == "data.turn_min") data.turn[0] = to_double(key, v);
  else if (key == "data.turn_max") data.turn[1] = to_double(key, v);
  else if (key == "data.shape_range") data.shape_range = to_double(key, v);
  else if (key == "data.occlusion_dropout") data.occlusion.joint_dropout = to_double(key, v);
  else if (key == "data.occluder_count") data.occlusion.occluder_count = to_int(key, v);
  else if (key == "data.occluder_size") data.occlusion.occluder_size = to_double(key, v);
  else if (key == "data.pixel_noise") data.pixel_noise = to_double(key, v);
  else if (key == "data.fx") data.intrinsics.fx = to_double(key, v);
  else if (key == "data.fy") data.intrinsics.fy = to_double(key, v);
  else if (key == "data.cx") data.intrinsics.cx = to_double(key, v);
  else if (key == "data.cy") data.intrinsics.cy = to_double(key, v);
  else if (key == "data.width") data.intrinsics.width = to_double(key, v);
  else if (key == "data.height") data.intrinsics.height = to_double(key, v);
  else if (key == "data.cam_dist_min") data.cam_distance[0] = to_double(key, v);
  else if (key == "data.cam_dist_max") data.cam_distance[1] = to_double(key, v);
  else if (key == "data.cam_elev_min") data.cam_elevation[0] = to_double(key, v);
  else if (key == "data.cam_elev_max") data.cam_elevation[1] = to_double(key, v);
  else if (key == "data.cam_yaw_range") data.cam_yaw_range = to_double(key, v);
  else if (key == "data.cam_pitch_range") data.cam_pitch_range = to_double(key, v);
  else if (key == "data.cam_roll_range") data.cam_roll_range = to_double(key, v);
  else if (key == "data.cam_transl_range") data.cam_transl_range = to_double(key, v);
  else if (key == "model.dim") dims.d_model = to_int(key, v);
  else if (key == "model.blocks") dims.n_blocks = to_int(key, v);
  else if (key == "model.heads") {
    heads = to_int(key, v);
    if (heads != 1) throw std::invalid_argument("config: model.heads must be 1 (single-head attention)");
  } else if (key == "model.ff_mult") dims.ff_mult = to_int(key, v);
  else if (key == "model.t_freqs") dims.t_freqs = to_int(key, v);
  else if (key == "model.rope_base") dims.rope_base = to_double(key, v);
  else if (key == "train.epochs_stage1") epochs_stage1 = to_int(key, v);
  else if (key == "train.epochs_stage2") epochs_stage2 = to_int(key, v);
  else if (key == "train.epochs_baseline") epochs_baseline = to_int(key, v);
  else if (key == "train.batch") batch = to_int(key, v);
  else if (key == "train.lr") lr = to_double(key, v);
  else if (key == "train.p_drop") p_drop = to_double(key, v);
  else if (key == "train.gt_anchor") gt_anchor = to_bool(key, v);
  else if (key == "loss.w_fm") weights.w_fm = to_double(key, v);
  else if (key == "loss.w_pose") weights.w_pose = to_double(key, v);
  else if (key == "loss.w_joints3d") weights.w_joints3d = to_double(key, v);
  else if (key == "loss.w_transl") weights.w_transl = to_double(key, v);
  else if (key == "loss.w_world_transl") weights.w_world_transl = to_double(key, v);
  else if (key == "loss.w_cons") weights.w_cons = to_double(key, v);
  else if (key == "loss.w_proj_max") weights.w_proj_max = to_double(key, v);
  else if (key == "loss.w_vertices") weights.w_vertices = to_double(key, v);
  else if (key == "loss.w_kp2d") weights.w_kp2d = to_double(key, v);
  else if (key == "loss.r_proj") weights.r_proj = to_double(key, v);
  else if (key == "loss.huber_delta_3d") weights.delta_3d = to_double(key, v);
  else if (key == "loss.huber_delta_px") weights.delta_px = to_double(key, v);
  else if (key == "sampling.steps") steps = to_int(key, v);
  else if (key == "sampling.cfg_scale") cfg_scale = to_double(key, v);
  else if (key == "metrics.chunk_size") metric_opts.chunk_size = to_int(key, v);
  else if (key == "metrics.align_with_scale") metric_opts.align_with_scale = to_bool(key, v);
  else if (key == "metrics.contact_v_thresh") metric_opts.contact_v_thresh = to_double(key, v);
  else if (key == "metrics.contact_h_thresh") metric_opts.contact_h_thresh = to_double(key, v);
  else if (key == "infer.occlusion_override") occlusion_override = to_double(key, v);
  else if (key == "out.dir") out_dir = v;
  else throw std::invalid_argument("config: unknown key " + key);
}

std::map<std::string, std::string> RunConfig::key_values() const {
  std::map<std::string, std::string> kv;
  kv["seed"] = std::to_string(seed);
  kv["data.train_path"] = train_path;
  kv["data.eval_path"] = eval_path;
  kv["data.train_count"] = std::to_string(train_count);
  kv["data.eval_count"] = std::to_string(eval_count);
  kv["data.n_frames"] = std::to_string(data.n_frames);
  kv["data.fps"] = fmt(data.fps);
  kv["data.stride_min"] = fmt(data.stride[0]);
  kv["data.stride_max"] = fmt(data.stride[1]);
  kv["data.cadence_min"] = fmt(data.cadence[0]);
  kv["data.cadence_max"] = fmt(data.cadence[1]);
  kv["data.arm_swing_min"] = fmt(data.arm_swing[0]);
  kv["data.arm_swing_max"] = fmt(data.arm_swing[1]);
  kv["data.turn_min"] = fmt(data.turn[0]);
  kv["data.turn_max"] = fmt(data.turn[1]);
  kv["data.shape_range"] = fmt(data.shape_range);
  kv["data.occlusion_dropout"] = fmt(data.occlusion.joint_dropout);
  kv["data.occluder_count"] = std::to_string(data.occlusion.occluder_count);
  kv["data.occluder_size"] = fmt(data.occlusion.occluder_size);
  kv["data.pixel_noise"] = fmt(data.pixel_noise);
  kv["data.fx"] = fmt(data.intrinsics.fx);
  kv["data.fy"] = fmt(data.intrinsics.fy);
  kv["data.cx"] = fmt(data.intrinsics.cx);
  kv["data.cy"] = fmt(data.intrinsics.cy);
  kv["data.width"] = fmt(data.intrinsics.width);
  kv["data.height"] = fmt(data.intrinsics.height);
  kv["data.cam_dist_min"] = fmt(data.cam_distance[0]);
  kv["data.cam_dist_max"] = fmt(data.cam_distance[1]);
  kv["data.cam_elev_min"] = fmt(data.cam_elevation[0]);
  kv["data.cam_elev_max"] = fmt(data.cam_elevation[1]);
  kv["data.cam_yaw_range"] = fmt(data.cam_yaw_range);
  kv["data.cam_pitch_range"] = fmt(data.cam_pitch_range);
  kv["data.cam_roll_range"] = fmt(data.cam_roll_range);
  kv["data.cam_transl_range"] = fmt(data.cam_transl_range);
  kv["model.dim"] = std::to_string(dims.d_model);
  kv["model.blocks"] = std::to_string(dims.n_blocks);
  kv["model.heads"] = std::to_string(heads);
  kv["model.ff_mult"] = std::to_string(dims.ff_mult);
  kv["model.t_freqs"] = std::to_string(dims.t_freqs);
  kv["model.rope_base"] = fmt(dims.rope_base);
  kv["train.epochs_stage1"] = std::to_string(epochs_stage1);
  kv["train.epochs_stage2"] = std::to_string(epochs_stage2);
  kv["train.epochs_baseline"] = std::to_string(epochs_baseline);
  kv["train.batch"] = std::to_string(batch);
  kv["train.lr"] = fmt(lr);
  kv["train.p_drop"] = fmt(p_drop);
  kv["train.gt_anchor"] = gt_anchor ? "true" : "false";
  kv["loss.w_fm"] = fmt(weights.w_fm);
  kv["loss.w_pose"] = fmt(weights.w_pose);
  kv["loss.w_joints3d"] = fmt(weights.w_joints3d);
  kv["loss.w_transl"] = fmt(weights.w_transl);
  kv["loss.w_world_transl"] = fmt(weights.w_world_transl);
  kv["loss.w_cons"] = fmt(weights.w_cons);
  kv["loss.w_proj_max"] = fmt(weights.w_proj_max);
  kv["loss.w_vertices"] = fmt(weights.w_vertices);
  kv["loss.w_kp2d"] = fmt(weights.w_kp2d);
  kv["loss.r_proj"] = fmt(weights.r_proj);
  kv["loss.huber_delta_3d"] = fmt(weights.delta_3d);
  kv["loss.huber_delta_px"] = fmt(weights.delta_px);
  kv["sampling.steps"] = std::to_string(steps);
  kv["sampling.cfg_scale"] = fmt(cfg_scale);
  kv["metrics.chunk_size"] = std::to_string(metric_opts.chunk_size);
  kv["metrics.align_with_scale"] = metric_opts.align_with_scale ? "true" : "false";
  kv["metrics.contact_v_thresh"] = fmt(metric_opts.contact_v_thresh);
  kv["metrics.contact_h_thresh"] = fmt(metric_opts.contact_h_thresh);
  kv["infer.occlusion_override"] = fmt(occlusion_override);
  kv["out.dir"] = out_dir;
  return kv;
}

std::string RunConfig::hash() const {
  std::ostringstream os;
  for (const auto& [k, v] : key_values()) os << k << "=" << v << "\n";
  const std::string s = os.str();
  const uint32_t crc = static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size())));
  std::ostringstream hex;
  hex << std::hex;
  hex.width(8);
  hex.fill('0');
  hex << crc;
  return hex.str();
}

void RunConfig::write_template(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw FormatError("config: cannot open " + path + " for writing");
  f << "# run configuration (key = value, '#' starts a comment)\n";
  f << "# model.heads is fixed at 1; a larger preset would be\n";
  f << "# model.dim = 512, model.blocks = 12 at substantially higher cost.\n";
  for (const auto& [k, v] : key_values()) f << k << " = " << v << "\n";
}

}  // namespace anchorflow
