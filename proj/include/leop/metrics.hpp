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

// Desk-scale molecule metrics and run reports.

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "leop/chem.hpp"

namespace leop::metrics {

/// Every atom within its maximum valence (aromatic bonds count 1.5) and a
/// single connected bond graph. Throws for FAKE or unknown elements.
bool valence_validity(const chem::Molecule3D& mol, const chem::AtomVocab& vocab);

/// Implicit hydrogens: floor(max valence - bond order sum), never negative.
int implicit_hydrogens(const chem::Molecule3D& mol, const chem::AtomVocab& vocab, int atom);

class LogpTable {
 public:
  /// The table shipped in data/crippen_reduced.txt.
  static const LogpTable& builtin();
  static LogpTable parse(std::istream& in);

  /// Cell value, or the element default (fallback set to true) when the cell
  /// is missing. Throws when neither exists.
  double lookup(const std::string& element, bool aromatic, int hetero_bucket, bool* fallback = nullptr) const;
  bool has_cell(const std::string& element, bool aromatic, int hetero_bucket) const;
  bool has_default(const std::string& element) const;

 private:
  std::map<std::string, double> cells_;
  std::map<std::string, double> defaults_;
};

/// Sum of per-atom contributions; `fallbacks` counts atoms typed by an element default.
double crippen_logp(const chem::Molecule3D& mol, const chem::AtomVocab& vocab, int* fallbacks = nullptr,
                    const LogpTable& table = LogpTable::builtin());

/// Heavy atoms plus implicit hydrogens (1.008 Da each).
double molecular_weight(const chem::Molecule3D& mol, const chem::AtomVocab& vocab);

/// Single, acyclic bonds whose endpoints both have heavy-atom degree >= 2.
int rotatable_bonds(const chem::Molecule3D& mol);

struct Lipinski {
  double mw = 0;
  int hbd = 0;
  int hba = 0;
  double logp = 0;
  int rotatable = 0;
  int count = 0;  // satisfied rules out of 5
};

Lipinski lipinski(const chem::Molecule3D& mol, const chem::AtomVocab& vocab);
int lipinski_count(const chem::Molecule3D& mol, const chem::AtomVocab& vocab);

struct TargetScores {
  std::string target;
  std::vector<double> generated;
  std::optional<double> reference;
};

/// Pooled over targets: share of each target's top-5 generated scores that
/// reach the reference score, in percent. Targets without a reference are
/// skipped and counted; nullopt when nothing was compared.
std::optional<double> high_affinity_pct(const std::vector<TargetScores>& targets, int* skipped = nullptr);

struct EvalReport {
  std::optional<double> mean_affinity;    // display scale
  std::optional<double> median_affinity;  // display scale
  std::optional<double> high_affinity_pct;
  std::optional<double> validity_pct;
  std::optional<double> mean_lipinski;
  std::optional<double> mean_logp;
  int n_samples = 0;
  int n_emitted = 0;
  int n_empty = 0;
  int n_valid = 0;
  int logp_fallbacks = 0;
  int skipped_targets = 0;
  std::vector<std::string> missing_files;
};

/// Reads manifest.json and the SDF files of a run directory and writes
/// report.json and report.csv into out_dir (the run directory when empty).
/// `references` overrides the per-target reference scores of the manifest.
EvalReport evaluate_run(const std::filesystem::path& run_dir, const std::map<std::string, double>& references = {},
                        const std::filesystem::path& out_dir = {});

}  // namespace leop::metrics
