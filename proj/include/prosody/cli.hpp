// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace prosody::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitPartial = 3;

/// Entry point of the `prosody` tool. Errors are printed to stderr as one
/// JSON object per line.
int run(int argc, char** argv);

}  // namespace prosody::cli
