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

// Molecular domain types, file formats, retain/mask partitioning, synthetic
// pocket-ligand complexes and the geometric contact score used as ground truth.

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace leop::chem {

using Coords = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Bond categories. NONE is always index 0.
enum class Bond : int { kNone = 0, kSingle = 1, kDouble = 2, kTriple = 3, kAromatic = 4 };

inline constexpr int kNumBondTypes = 5;

const std::vector<std::string>& bond_names();

/// Ordered element symbols followed by the reserved FAKE category.
class AtomVocab {
 public:
  /// {C, N, O, F, S, Cl, FAKE}
  static AtomVocab standard();

  /// `elements` excludes FAKE; it is appended.
  explicit AtomVocab(std::vector<std::string> elements);

  int size() const { return static_cast<int>(symbols_.size()); }
  int fake() const { return size() - 1; }
  bool is_fake(int type) const { return type == fake(); }

  /// Case-insensitive lookup of an element symbol; never matches FAKE.
  std::optional<int> index_of(std::string_view symbol) const;
  const std::string& symbol(int type) const { return symbols_.at(static_cast<std::size_t>(type)); }
  const std::vector<std::string>& symbols() const { return symbols_; }

  bool operator==(const AtomVocab&) const = default;

 private:
  std::vector<std::string> symbols_;
};

/// A ligand with heavy atoms only: coordinates, atom categories and a
/// symmetric bond-category matrix.
struct Molecule3D {
  Coords x;
  std::vector<int> atom_type;
  std::vector<int> bonds;  // n*n, row-major

  Molecule3D() = default;
  explicit Molecule3D(int n);

  int size() const { return static_cast<int>(atom_type.size()); }
  Bond bond(int i, int j) const { return static_cast<Bond>(bonds[idx(i, j)]); }
  int bond_type(int i, int j) const { return bonds[idx(i, j)]; }
  /// Sets both (i,j) and (j,i).
  void set_bond(int i, int j, Bond b);
  void set_bond_type(int i, int j, int b) { set_bond(i, j, static_cast<Bond>(b)); }

  bool operator==(const Molecule3D&) const = default;

 private:
  std::size_t idx(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(size()) + static_cast<std::size_t>(j);
  }
};

/// Protein pocket atoms. Never diffused.
struct PocketContext {
  Coords x;
  std::vector<int> atom_type;
  std::string pocket_id;

  int size() const { return static_cast<int>(atom_type.size()); }
};

/// A ligand split into retained context (mask false) and generated slots (mask true).
struct LigandPartition {
  Molecule3D ligand;
  std::vector<bool> mask;

  int n_mask() const;
  std::vector<int> mask_indices() const;
  std::vector<int> retained_indices() const;
};

struct MaskedComplex {
  PocketContext pocket;
  LigandPartition part;
};

/// Structural checks shared by every operation: bond symmetry, NONE diagonal,
/// valid categories, finite coordinates. Throws ValidationError.
void check_molecule(const Molecule3D& mol, const AtomVocab& vocab);

Eigen::RowVector3d centroid(const Coords& x, const std::vector<int>& rows);

// ---------------------------------------------------------------- formats

struct PdbParseResult {
  PocketContext pocket;
  int skipped_unknown = 0;
};

/// Fixed-column ATOM/HETATM reader. Only the first alternate location is kept.
PdbParseResult parse_pdb_pocket(std::istream& in, const AtomVocab& vocab, std::string pocket_id = "");
std::string write_pdb_pocket(const PocketContext& pocket, const AtomVocab& vocab);

/// V2000 connection table; stops at "M  END".
Molecule3D parse_sdf_molecule(std::istream& in, const AtomVocab& vocab);
/// Coordinates are written with 4 decimals. Refuses molecules containing FAKE.
std::string write_sdf(const Molecule3D& mol, const AtomVocab& vocab, std::string_view title = "leop");

// ---------------------------------------------------------------- masking

LigandPartition partition_retain_mask(const Molecule3D& mol, const std::vector<int>& mask_indices);

/// Appends FAKE slots to the mask up to n_max total mask atoms. Fake atoms sit
/// at the retained centroid with NONE bonds to everything.
LigandPartition pad_with_fake_atoms(const LigandPartition& part, int n_max, const AtomVocab& vocab);

/// Number of connected components of the bond graph restricted to `atoms`.
int count_components(const Molecule3D& mol, const std::vector<int>& atoms);

// ---------------------------------------------------------------- toy data

struct Range {
  double lo = 0;
  double hi = 0;
};

struct ToyDatasetSpec {
  int n_complexes = 200;
  Range pocket_size{16, 24};
  Range ligand_size{6, 12};
  Range mask_fraction{0.2, 0.4};
  std::uint64_t random_seed = 7;
  double contact_radius = 4.0;
  /// Share of complexes given a two-fragment (linker) mask.
  double linker_fraction = 0.3;

  /// Throws ValidationError naming the offending field.
  void validate() const;
};

enum class MaskTask { kScaffold, kLinker };

struct ToyComplex {
  PocketContext pocket;
  Molecule3D ligand;
  std::vector<int> mask_indices;
  MaskTask task = MaskTask::kScaffold;
};

ToyComplex gen_toy_complex(std::uint64_t seed, const ToyDatasetSpec& spec, const AtomVocab& vocab);

/// spec.n_complexes complexes; complex i uses seed derive_seed(spec.random_seed, i).
std::vector<ToyComplex> gen_toy_dataset(const ToyDatasetSpec& spec, const AtomVocab& vocab);

/// Maximum valence per element symbol; nullopt for symbols outside the table.
std::optional<double> max_valence(std::string_view symbol);
double bond_order(Bond b);

// ---------------------------------------------------------------- oracle

/// Every constant of the contact score lives here.
struct OracleConstants {
  double contact_radius = 4.0;  // soft-count Gaussian width is contact_radius / 2
  double saturation = 2.0;      // s(c) = c / (c + saturation)
  double steric_distance = 1.2;
  double steric_weight = 1.0;
};

/// Mean over ligand atoms of s(c_i) - steric_i, clamped to [0, 1], where
/// c_i = sum_j exp(-d_ij^2 / (2 w^2)) over pocket atoms and
/// steric_i = weight * sum_j max(0, steric_distance - d_ij)^2.
double oracle_affinity(const PocketContext& pocket, const Molecule3D& mol, const AtomVocab& vocab,
                       const OracleConstants& k = {});

/// Display scale for affinities (pK-like units).
inline constexpr double kAffinityDisplayScale = 14.0;

}  // namespace leop::chem
