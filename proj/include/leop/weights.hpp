// Copyright 2026 The Leop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Versioned binary weights file.
//
// Layout: the 4 bytes "LEOP", a little-endian u32 format version, a u64 header
// length, a UTF-8 JSON header, then every array named in header["sections"]
// as little-endian f64 values in row-major order.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "leop/egnn.hpp"
#include "leop/schedule.hpp"

namespace leop {

inline constexpr std::uint32_t kWeightsVersion = 1;

/// Adam moments for the denoiser parameters.
struct OptimizerState {
  std::int64_t step = 0;
  std::vector<ad::Mat> m, v;
};

struct WeightsFile {
  egnn::ModelParams params;
  ScheduleSpec schedule;
  int epoch = 0;           // completed denoiser epochs
  int affinity_epoch = 0;  // completed affinity-head epochs
  std::optional<OptimizerState> optimizer;
};

/// Writes to a temporary sibling and renames it into place.
void save_weights(const std::filesystem::path& path, const WeightsFile& w);
WeightsFile load_weights(const std::filesystem::path& path);

std::string encode_weights(const WeightsFile& w);
WeightsFile decode_weights(const std::string& bytes);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t v);
/// Hex FNV-1a of a file's bytes.
std::string file_hash(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Atomic write (temporary file then rename).
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace leop
