// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "anchorflow/synthdata.hpp"

#include "json.hpp"

namespace anchorflow {

// Container layout: magic "FMKD", u32 format version, u64 manifest length,
// JSON manifest, then per record a u64 payload length, the payload (f32
// little-endian arrays in manifest-declared order) and its CRC-32.
inline constexpr uint32_t kDatasetVersion = 1;

void write_dataset(const std::string& path, const std::vector<DatasetRecord>& records, double fps,
                   const nlohmann::json& extra_manifest = nlohmann::json::object());

struct LoadedDataset {
  std::vector<DatasetRecord> records;
  double fps = 30.0;
  nlohmann::json manifest;
};

// Throws FormatError on bad magic/version, truncation, or checksum mismatch
// (the message names the failing record).
LoadedDataset read_dataset(const std::string& path);

}  // namespace anchorflow
