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

// Command-line front end: configuration schema and subcommand drivers.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "leop/affinity.hpp"
#include "leop/chem.hpp"
#include "leop/complex.hpp"
#include "leop/egnn.hpp"
#include "leop/schedule.hpp"
#include "leop/training.hpp"

namespace leop::cli {

inline constexpr const char* kToolVersion = "leop 0.1.0";

enum class Task { kScaffoldDecoration, kLinkerDesign, kScaffoldHopping };
std::string to_string(Task t);

struct RunConfig {
  Task task = Task::kScaffoldDecoration;
  std::uint64_t seed = 0;
  ScheduleSpec schedule;
  egnn::ModelConfig model;
  std::vector<std::string> vocab = {"C", "N", "O", "F", "S", "Cl"};
  training::TrainConfig train;
  bool resume = false;
  affinity::AffinityTrainConfig affinity_train;
  affinity::GuidanceConfig guidance;
  std::optional<chem::ToyDatasetSpec> data_spec;
  std::string dataset_dir;
  int n_samples = 100;
  std::vector<int> targets = {0};
  int t_hop = 0;  // 0 = T / 10
  std::vector<int> hop_fragment;
  PaddingPolicy padding;
  std::string weights;
  std::string run_dir;
  std::string output_dir;
  int threads = 0;

  /// Every field, defaults included.
  nlohmann::json to_json() const;
};

/// Strict parse: unknown keys and wrongly typed values raise ValidationError
/// naming the offending field.
RunConfig parse_config(const nlohmann::json& j);

struct DatasetEntry {
  chem::PocketContext pocket;
  chem::Molecule3D ligand;
  std::vector<int> mask_indices;
};

struct Dataset {
  std::vector<DatasetEntry> entries;
  chem::OracleConstants oracle;
};

/// Writes pockets/*.pdb, ligands/*.sdf, dataset.json, oracle_scores.csv and spec.json.
void write_dataset(const std::string& dir, const chem::ToyDatasetSpec& spec, const chem::AtomVocab& vocab);
Dataset load_dataset(const std::string& dir, const chem::AtomVocab& vocab);

/// Entry point; returns the process exit code (0 ok, 1 numeric failure,
/// 2 usage or configuration error).
int run_cli(int argc, char** argv);

}  // namespace leop::cli
