// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include "anchorflow/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "anchorflow/errors.hpp"
#include "anchorflow/latent.hpp"
#include "anchorflow/version.hpp"

namespace anchorflow {

namespace {

constexpr char kMagic[4] = {'F', 'M', 'C', 'K'};

template <typename T>
void write_pod(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f, const char* what) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw FormatError(std::string("checkpoint: truncated ") + what);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& kind, const ModelDims& dims,
                     std::vector<ParamRef> params, const nlohmann::json& extra) {
  nlohmann::json header = extra;
  header["format_version"] = kCheckpointVersion;
  header["tool_version"] = kToolVersion;
  header["kind"] = kind;
  header["dims"] = {{"d_model", dims.d_model}, {"n_blocks", dims.n_blocks},
                    {"ff_mult", dims.ff_mult}, {"t_freqs", dims.t_freqs},
                    {"rope_base", dims.rope_base}, {"kp_width", dims.kp_width}};
  header["layout_hash"] = LatentLayout::standard().content_hash(Skeleton::standard());
  header["params"] = nlohmann::json::array();
  std::vector<float> payload;
  for (const auto& p : params) {
    header["params"].push_back(
        {{"name", p.name}, {"rows", p.value->rows()}, {"cols", p.value->cols()}});
    for (int r = 0; r < p.value->rows(); ++r) {
      for (int c = 0; c < p.value->cols(); ++c) {
        payload.push_back(static_cast<float>((*p.value)(r, c)));
      }
    }
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("checkpoint: cannot open " + path + " for writing");
  f.write(kMagic, 4);
  write_pod<uint32_t>(f, kCheckpointVersion);
  const std::string hstr = header.dump();
  write_pod<uint64_t>(f, hstr.size());
  f.write(hstr.data(), static_cast<std::streamsize>(hstr.size()));
  const uint64_t bytes = payload.size() * sizeof(float);
  f.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(bytes));
  const uint32_t crc = static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(bytes)));
  write_pod<uint32_t>(f, crc);
  if (!f) throw FormatError("checkpoint: write failed for " + path);
}

nlohmann::json load_checkpoint_header(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("checkpoint: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("checkpoint: bad magic");
  const uint32_t version = read_pod<uint32_t>(f, "version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported format version " + std::to_string(version));
  }
  const uint64_t hlen = read_pod<uint64_t>(f, "header length");
  std::string hstr(hlen, '\0');
  f.read(hstr.data(), static_cast<std::streamsize>(hlen));
  if (!f) throw FormatError("checkpoint: truncated header");
  nlohmann::json header = nlohmann::json::parse(hstr, nullptr, false);
  if (header.is_discarded()) throw FormatError("checkpoint: header is not valid JSON");
  return header;
}

void load_checkpoint_params(const std::string& path, std::vector<ParamRef> params) {
  const nlohmann::json header = load_checkpoint_header(path);
  std::ifstream f(path, std::ios::binary);
  f.seekg(4 + sizeof(uint32_t));
  const uint64_t hlen = read_pod<uint64_t>(f, "header length");
  f.seekg(static_cast<std::streamoff>(hlen), std::ios::cur);

  const auto& manifest = header.at("params");
  if (manifest.size() != params.size()) {
    throw FormatError("checkpoint: parameter count mismatch");
  }
  uint64_t total = 0;
  for (size_t i = 0; i < params.size(); ++i) {
    if (manifest[i].at("name").get<std::string>() != params[i].name ||
        manifest[i].at("rows").get<int>() != params[i].value->rows() ||
        manifest[i].at("cols").get<int>() != params[i].value->cols()) {
      throw FormatError("checkpoint: parameter manifest mismatch at " + params[i].name);
    }
    total += static_cast<uint64_t>(params[i].value->size());
  }
  std::vector<float> payload(total);
  f.read(reinterpret_cast<char*>(payload.data()),
         static_cast<std::streamsize>(total * sizeof(float)));
  if (!f) throw FormatError("checkpoint: truncated parameters");
  const uint32_t stored_crc = read_pod<uint32_t>(f, "checksum");
  const uint32_t crc = static_cast<uint32_t>(crc32(
      0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(total * sizeof(float))));
  if (crc != stored_crc) throw FormatError("checkpoint: checksum mismatch");

  size_t pos = 0;
  for (auto& p : params) {
    for (int r = 0; r < p.value->rows(); ++r) {
      for (int c = 0; c < p.value->cols(); ++c) {
        (*p.value)(r, c) = static_cast<double>(payload[pos++]);
      }
    }
  }
}

ModelDims dims_from_header(const nlohmann::json& header) {
  ModelDims dims;
  const auto& d = header.at("dims");
  dims.d_model = d.at("d_model").get<int>();
  dims.n_blocks = d.at("n_blocks").get<int>();
  dims.ff_mult = d.at("ff_mult").get<int>();
  dims.t_freqs = d.at("t_freqs").get<int>();
  dims.rope_base = d.at("rope_base").get<double>();
  dims.kp_width = d.at("kp_width").get<int>();
  return dims;
}

}  // namespace anchorflow
