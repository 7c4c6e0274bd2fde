// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace anchorflow {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace anchorflow
