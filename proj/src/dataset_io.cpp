// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include "anchorflow/dataset_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "anchorflow/errors.hpp"
#include "anchorflow/latent.hpp"
#include "anchorflow/version.hpp"

namespace anchorflow {

namespace {

constexpr char kMagic[4] = {'F', 'M', 'K', 'D'};

void append_matrix(std::vector<float>& out, const Eigen::MatrixXd& m) {
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) out.push_back(static_cast<float>(m(r, c)));
  }
}

template <typename Vec>
void append_vec(std::vector<float>& out, const Vec& v) {
  for (int i = 0; i < v.size(); ++i) out.push_back(static_cast<float>(v(i)));
}

struct Reader {
  const std::vector<float>& data;
  size_t pos = 0;
  int record = 0;

  float next() {
    if (pos >= data.size()) {
      throw FormatError("dataset record " + std::to_string(record) + ": truncated payload");
    }
    return data[pos++];
  }
  void read_matrix(Eigen::MatrixXd& m, int rows, int cols) {
    m.resize(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) m(r, c) = static_cast<double>(next());
    }
  }
  template <typename Vec>
  void read_vec(Vec& v) {
    for (int i = 0; i < v.size(); ++i) v(i) = static_cast<double>(next());
  }
};

std::vector<float> pack_record(const DatasetRecord& rec) {
  std::vector<float> out;
  const int frames = static_cast<int>(rec.gt.size());
  out.reserve(frames * 800);
  for (const auto& s : rec.gt) append_matrix(out, s.body_pose);
  append_vec(out, rec.gt.front().beta);
  for (const auto& s : rec.gt) append_vec(out, s.gamma_c);
  for (const auto& s : rec.gt) append_vec(out, s.tau_c);
  for (const auto& s : rec.gt) append_vec(out, s.gamma_w);
  for (const auto& s : rec.gt) append_vec(out, s.tau_w);
  out.push_back(static_cast<float>(rec.intrinsics.fx));
  out.push_back(static_cast<float>(rec.intrinsics.fy));
  out.push_back(static_cast<float>(rec.intrinsics.cx));
  out.push_back(static_cast<float>(rec.intrinsics.cy));
  out.push_back(static_cast<float>(rec.intrinsics.width));
  out.push_back(static_cast<float>(rec.intrinsics.height));
  for (const auto& p : rec.cam_poses) append_matrix(out, p.rotation);
  for (const auto& p : rec.cam_poses) append_vec(out, p.translation);
  if (rec.has_obs) {
    append_matrix(out, rec.obs.bbox);
    append_matrix(out, rec.obs.kp_rays);
    append_matrix(out, rec.obs.img_feat);
    append_matrix(out, rec.obs.rel_cam);
    append_matrix(out, rec.kp2d);
    append_matrix(out, rec.visibility);
  }
  return out;
}

DatasetRecord unpack_record(const std::vector<float>& payload, int frames, bool has_obs,
                            int record_index) {
  Reader rd{payload, 0, record_index};
  DatasetRecord rec;
  rec.has_obs = has_obs;
  rec.gt.resize(frames);
  for (auto& s : rec.gt) {
    Eigen::MatrixXd bp;
    rd.read_matrix(bp, kNumBodyJoints, 3);
    s.body_pose = bp;
  }
  Vec10 beta;
  rd.read_vec(beta);
  for (auto& s : rec.gt) s.beta = beta;
  for (auto& s : rec.gt) rd.read_vec(s.gamma_c);
  for (auto& s : rec.gt) rd.read_vec(s.tau_c);
  for (auto& s : rec.gt) rd.read_vec(s.gamma_w);
  for (auto& s : rec.gt) rd.read_vec(s.tau_w);
  rec.intrinsics.fx = rd.next();
  rec.intrinsics.fy = rd.next();
  rec.intrinsics.cx = rd.next();
  rec.intrinsics.cy = rd.next();
  rec.intrinsics.width = rd.next();
  rec.intrinsics.height = rd.next();
  rec.cam_poses.resize(frames);
  for (auto& p : rec.cam_poses) {
    Eigen::MatrixXd r;
    rd.read_matrix(r, 3, 3);
    p.rotation = r;
  }
  for (auto& p : rec.cam_poses) rd.read_vec(p.translation);
  if (has_obs) {
    const int kp_width = kNumJoints * ray_embedding_dim();
    rd.read_matrix(rec.obs.bbox, frames, kBboxDim);
    rd.read_matrix(rec.obs.kp_rays, frames, kp_width);
    rd.read_matrix(rec.obs.img_feat, frames, kImgFeatDim);
    rd.read_matrix(rec.obs.rel_cam, frames, kRelCamDim);
    rec.obs.torso_pose = Eigen::MatrixXd::Zero(frames, kTorsoCondDim);
    rd.read_matrix(rec.kp2d, frames, 2 * kNumJoints);
    rd.read_matrix(rec.visibility, frames, kNumJoints);
  }
  if (rd.pos != payload.size()) {
    throw FormatError("dataset record " + std::to_string(record_index) + ": payload size mismatch");
  }
  return rec;
}

template <typename T>
void write_pod(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f, const char* what) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw FormatError(std::string("dataset: truncated ") + what);
  return v;
}

}  // namespace

void write_dataset(const std::string& path, const std::vector<DatasetRecord>& records, double fps,
                   const nlohmann::json& extra_manifest) {
  nlohmann::json manifest = extra_manifest;
  manifest["format_version"] = kDatasetVersion;
  manifest["tool_version"] = kToolVersion;
  manifest["fps"] = fps;
  manifest["n_records"] = records.size();
  manifest["layout_hash"] = LatentLayout::standard().content_hash(Skeleton::standard());
  manifest["joint_names"] = nlohmann::json::array();
  for (const auto& n : Skeleton::standard().joint_names) manifest["joint_names"].push_back(n);
  const bool has_obs = records.empty() ? false : records.front().has_obs;
  manifest["has_obs"] = has_obs;
  manifest["arrays"] = nlohmann::json::array();
  auto arr = [&manifest](const char* name, int width, bool per_frame) {
    manifest["arrays"].push_back({{"name", name}, {"width", width}, {"per_frame", per_frame}});
  };
  arr("gt_theta", 3 * kNumBodyJoints, true);
  arr("gt_beta", kShapeDims, false);
  arr("gt_gamma_c", 3, true);
  arr("gt_tau_c", 3, true);
  arr("gt_gamma_w", 3, true);
  arr("gt_tau_w", 3, true);
  arr("cam_intrinsics", 6, false);
  arr("cam_rot", 9, true);
  arr("cam_transl", 3, true);
  if (has_obs) {
    arr("obs_bbox", kBboxDim, true);
    arr("obs_kp_rays", kNumJoints * ray_embedding_dim(), true);
    arr("obs_img_feat", kImgFeatDim, true);
    arr("obs_rel_cam", kRelCamDim, true);
    arr("obs_kp2d", 2 * kNumJoints, true);
    arr("obs_visibility", kNumJoints, true);
  }
  manifest["records"] = nlohmann::json::array();
  for (const auto& r : records) {
    manifest["records"].push_back({{"seed", r.seed}, {"n_frames", r.gt.size()}});
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("dataset: cannot open " + path + " for writing");
  f.write(kMagic, 4);
  write_pod<uint32_t>(f, kDatasetVersion);
  const std::string mstr = manifest.dump();
  write_pod<uint64_t>(f, mstr.size());
  f.write(mstr.data(), static_cast<std::streamsize>(mstr.size()));
  for (const auto& rec : records) {
    if (rec.has_obs != has_obs) throw FormatError("dataset: records disagree on has_obs");
    const std::vector<float> payload = pack_record(rec);
    const uint64_t bytes = payload.size() * sizeof(float);
    write_pod<uint64_t>(f, bytes);
    f.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(bytes));
    const uint32_t crc = static_cast<uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(bytes)));
    write_pod<uint32_t>(f, crc);
  }
  if (!f) throw FormatError("dataset: write failed for " + path);
}

LoadedDataset read_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("dataset: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("dataset: bad magic");
  const uint32_t version = read_pod<uint32_t>(f, "version");
  if (version != kDatasetVersion) {
    throw FormatError("dataset: unsupported format version " + std::to_string(version));
  }
  const uint64_t mlen = read_pod<uint64_t>(f, "manifest length");
  std::string mstr(mlen, '\0');
  f.read(mstr.data(), static_cast<std::streamsize>(mlen));
  if (!f) throw FormatError("dataset: truncated manifest");

  LoadedDataset out;
  out.manifest = nlohmann::json::parse(mstr, nullptr, false);
  if (out.manifest.is_discarded()) throw FormatError("dataset: manifest is not valid JSON");
  out.fps = out.manifest.at("fps").get<double>();
  const bool has_obs = out.manifest.at("has_obs").get<bool>();
  const auto& rec_meta = out.manifest.at("records");

  for (size_t i = 0; i < rec_meta.size(); ++i) {
    const uint64_t bytes = read_pod<uint64_t>(f, "record length");
    if (bytes % sizeof(float) != 0) {
      throw FormatError("dataset record " + std::to_string(i) + ": misaligned payload");
    }
    std::vector<float> payload(bytes / sizeof(float));
    f.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(bytes));
    if (!f) throw FormatError("dataset record " + std::to_string(i) + ": truncated payload");
    const uint32_t stored_crc = read_pod<uint32_t>(f, "record checksum");
    const uint32_t crc = static_cast<uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(bytes)));
    if (crc != stored_crc) {
      throw FormatError("dataset record " + std::to_string(i) + ": checksum mismatch");
    }
    const int frames = rec_meta[i].at("n_frames").get<int>();
    DatasetRecord rec = unpack_record(payload, frames, has_obs, static_cast<int>(i));
    rec.seed = rec_meta[i].at("seed").get<uint64_t>();
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace anchorflow
