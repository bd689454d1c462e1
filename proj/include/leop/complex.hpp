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

// A pocket-ligand complex prepared for diffusion: coordinates shifted to the
// conditioning center, mask/retain bookkeeping and the list of diffused bonds.

#include <utility>
#include <vector>

#include "leop/chem.hpp"
#include "leop/diffusion.hpp"

namespace leop {

struct Complex {
  chem::PocketContext pocket;  // centered frame
  chem::Molecule3D ligand;     // centered frame; mask rows carry the clean values when known
  chem::Molecule3D ligand_original;  // input frame, untouched
  std::vector<bool> mask;
  std::vector<int> mask_atoms;
  std::vector<int> retained_atoms;
  /// Unordered ligand pairs (i < j) with at least one endpoint in the mask.
  std::vector<std::pair<int, int>> diffused_pairs;
  Eigen::RowVector3d center = Eigen::RowVector3d::Zero();

  int n_ligand() const { return ligand.size(); }
  int n_mask() const { return static_cast<int>(mask_atoms.size()); }
  int n_pairs() const { return static_cast<int>(diffused_pairs.size()); }
};

/// Retained centroid, or the midpoint of the two fragment centroids when the
/// retained atoms form exactly two bonded components.
Eigen::RowVector3d conditioning_center(const chem::LigandPartition& part);

/// Builds the centered complex from a pocket and a (possibly padded) partition.
Complex make_complex(const chem::PocketContext& pocket, const chem::LigandPartition& part);

/// Number of FAKE slots appended to a mask: min(max_extra, 1 + Poisson(mean_extra - 1)).
struct PaddingPolicy {
  double mean_extra = 2.0;
  int max_extra = 8;

  void validate() const;
  int draw(diffusion::Rng& rng) const;
};

/// Pads the partition with `extra` fake slots and builds the centered complex.
Complex prepare_complex(const chem::PocketContext& pocket, const chem::LigandPartition& part, int extra,
                        const chem::AtomVocab& vocab);

/// Clean mask state (t = 0) read from the complex ligand.
diffusion::NoisedState clean_state(const Complex& cx, int k_atoms);

/// Writes a mask state back into a copy of the ligand (argmax categories) and
/// returns it in the original frame.
chem::Molecule3D assemble_ligand(const Complex& cx, const diffusion::NoisedState& st);

}  // namespace leop
