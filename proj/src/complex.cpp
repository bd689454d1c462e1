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

#include "leop/complex.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>

#include "leop/error.hpp"

namespace leop {

Eigen::RowVector3d conditioning_center(const chem::LigandPartition& part) {
  const auto retained = part.retained_indices();
  if (retained.empty()) throw ValidationError("complex: no retained atoms");
  const auto& mol = part.ligand;
  std::vector<int> label(static_cast<std::size_t>(mol.size()), -1);
  std::vector<char> in(static_cast<std::size_t>(mol.size()), 0);
  for (int r : retained) in[static_cast<std::size_t>(r)] = 1;
  int comps = 0;
  for (int s : retained) {
    if (label[static_cast<std::size_t>(s)] >= 0) continue;
    std::queue<int> q;
    q.push(s);
    label[static_cast<std::size_t>(s)] = comps;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v = 0; v < mol.size(); ++v) {
        if (in[static_cast<std::size_t>(v)] && label[static_cast<std::size_t>(v)] < 0 &&
            mol.bond(u, v) != chem::Bond::kNone) {
          label[static_cast<std::size_t>(v)] = comps;
          q.push(v);
        }
      }
    }
    ++comps;
  }
  if (comps != 2) return chem::centroid(mol.x, retained);
  std::vector<int> a, b;
  for (int r : retained) (label[static_cast<std::size_t>(r)] == 0 ? a : b).push_back(r);
  return 0.5 * (chem::centroid(mol.x, a) + chem::centroid(mol.x, b));
}

Complex make_complex(const chem::PocketContext& pocket, const chem::LigandPartition& part) {
  if (part.mask.size() != static_cast<std::size_t>(part.ligand.size())) {
    throw ValidationError("complex: mask length differs from ligand size");
  }
  Complex cx;
  cx.center = conditioning_center(part);
  cx.pocket = pocket;
  cx.pocket.x.rowwise() -= cx.center;
  cx.ligand = part.ligand;
  cx.ligand.x.rowwise() -= cx.center;
  cx.ligand_original = part.ligand;
  cx.mask = part.mask;
  cx.mask_atoms = part.mask_indices();
  cx.retained_atoms = part.retained_indices();
  if (cx.mask_atoms.empty()) throw ValidationError("complex: no masked atoms");
  const int n = part.ligand.size();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (cx.mask[static_cast<std::size_t>(i)] || cx.mask[static_cast<std::size_t>(j)]) {
        cx.diffused_pairs.emplace_back(i, j);
      }
    }
  }
  return cx;
}

void PaddingPolicy::validate() const {
  if (!(mean_extra >= 1.0) || !std::isfinite(mean_extra)) throw ValidationError("padding: mean_extra must be >= 1");
  if (max_extra < 0) throw ValidationError("padding: max_extra must be >= 0");
}

int PaddingPolicy::draw(diffusion::Rng& rng) const {
  int extra = 1;
  if (mean_extra > 1.0) extra += std::poisson_distribution<int>(mean_extra - 1.0)(rng);
  return std::min(extra, max_extra);
}

Complex prepare_complex(const chem::PocketContext& pocket, const chem::LigandPartition& part, int extra,
                        const chem::AtomVocab& vocab) {
  if (extra < 0) throw ValidationError("complex: negative padding");
  if (extra == 0) return make_complex(pocket, part);
  return make_complex(pocket, chem::pad_with_fake_atoms(part, part.n_mask() + extra, vocab));
}

diffusion::NoisedState clean_state(const Complex& cx, int k_atoms) {
  diffusion::NoisedState st;
  const int m = cx.n_mask();
  st.x.resize(m, 3);
  std::vector<int> types;
  for (int r = 0; r < m; ++r) {
    const int a = cx.mask_atoms[static_cast<std::size_t>(r)];
    st.x.row(r) = cx.ligand.x.row(a);
    types.push_back(cx.ligand.atom_type[static_cast<std::size_t>(a)]);
  }
  st.v = diffusion::onehot(types, k_atoms);
  std::vector<int> bonds;
  for (auto [i, j] : cx.diffused_pairs) bonds.push_back(cx.ligand.bond_type(i, j));
  st.b = diffusion::onehot(bonds, chem::kNumBondTypes);
  st.t = 0;
  return st;
}

chem::Molecule3D assemble_ligand(const Complex& cx, const diffusion::NoisedState& st) {
  chem::Molecule3D mol = cx.ligand_original;
  const auto types = diffusion::argmax_rows(st.v);
  for (int r = 0; r < cx.n_mask(); ++r) {
    const int a = cx.mask_atoms[static_cast<std::size_t>(r)];
    mol.x.row(a) = st.x.row(r) + cx.center;
    mol.atom_type[static_cast<std::size_t>(a)] = types[static_cast<std::size_t>(r)];
  }
  const auto bonds = diffusion::argmax_rows(st.b);
  for (int q = 0; q < cx.n_pairs(); ++q) {
    auto [i, j] = cx.diffused_pairs[static_cast<std::size_t>(q)];
    mol.set_bond_type(i, j, bonds[static_cast<std::size_t>(q)]);
  }
  return mol;
}

}  // namespace leop
