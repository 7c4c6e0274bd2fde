// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "anchorflow/nn.hpp"

#include "json.hpp"

namespace anchorflow {

// Container layout: magic "FMCK", u32 version, u64 header length, JSON header
// (model kind, dims, parameter manifest, hashes), then all parameters as f32
// little-endian in declaration order, then a CRC-32 of the parameter bytes.
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const std::string& kind, const ModelDims& dims,
                     std::vector<ParamRef> params, const nlohmann::json& extra);

nlohmann::json load_checkpoint_header(const std::string& path);

// Shapes and names must match the header; the target network must already be
// constructed with the header's dims.
void load_checkpoint_params(const std::string& path, std::vector<ParamRef> params);

ModelDims dims_from_header(const nlohmann::json& header);

}  // namespace anchorflow
