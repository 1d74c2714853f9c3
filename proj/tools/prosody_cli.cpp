// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#include "prosody/cli.hpp"

int main(int argc, char** argv) { return prosody::cli::run(argc, argv); }
