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

#include "leop/chem.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <queue>
#include <random>
#include <sstream>

#include "leop/error.hpp"
#include "leop/rng.hpp"

namespace leop::chem {

namespace {

std::string normalize_symbol(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<char>(i == 0 ? std::toupper(static_cast<unsigned char>(out[i]))
                                      : std::tolower(static_cast<unsigned char>(out[i])));
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string_view column(std::string_view line, std::size_t start, std::size_t len) {
  if (start >= line.size()) return {};
  return line.substr(start, std::min(len, line.size() - start));
}

std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<int> to_int(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

bool getline_stripped(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

}  // namespace

const std::vector<std::string>& bond_names() {
  static const std::vector<std::string> names = {"NONE", "SINGLE", "DOUBLE", "TRIPLE", "AROMATIC"};
  return names;
}

AtomVocab AtomVocab::standard() { return AtomVocab({"C", "N", "O", "F", "S", "Cl"}); }

AtomVocab::AtomVocab(std::vector<std::string> elements) {
  if (elements.empty()) throw ValidationError("atom vocabulary needs at least one element");
  for (auto& e : elements) {
    std::string n = normalize_symbol(e);
    if (n.empty() || n == "Fake") throw ValidationError("invalid element symbol '" + e + "'");
    if (std::find(symbols_.begin(), symbols_.end(), n) != symbols_.end()) {
      throw ValidationError("duplicate element symbol '" + n + "'");
    }
    symbols_.push_back(std::move(n));
  }
  symbols_.emplace_back("FAKE");
}

std::optional<int> AtomVocab::index_of(std::string_view symbol) const {
  const std::string n = normalize_symbol(symbol);
  for (int i = 0; i < fake(); ++i) {
    if (symbols_[static_cast<std::size_t>(i)] == n) return i;
  }
  return std::nullopt;
}

Molecule3D::Molecule3D(int n)
    : x(Coords::Zero(n, 3)),
      atom_type(static_cast<std::size_t>(n), 0),
      bonds(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0) {}

void Molecule3D::set_bond(int i, int j, Bond b) {
  if (i == j && b != Bond::kNone) throw ValidationError("self bond requested");
  bonds[idx(i, j)] = static_cast<int>(b);
  bonds[idx(j, i)] = static_cast<int>(b);
}

int LigandPartition::n_mask() const {
  return static_cast<int>(std::count(mask.begin(), mask.end(), true));
}

std::vector<int> LigandPartition::mask_indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> LigandPartition::retained_indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

void check_molecule(const Molecule3D& mol, const AtomVocab& vocab) {
  const int n = mol.size();
  if (mol.x.rows() != n || mol.bonds.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
    throw ValidationError("molecule arrays have inconsistent sizes");
  }
  if (!mol.x.allFinite()) throw ValidationError("molecule has non-finite coordinates");
  for (int i = 0; i < n; ++i) {
    if (mol.atom_type[static_cast<std::size_t>(i)] < 0 || mol.atom_type[static_cast<std::size_t>(i)] >= vocab.size()) {
      throw ValidationError("atom " + std::to_string(i) + " has an invalid category");
    }
    if (mol.bond(i, i) != Bond::kNone) throw ValidationError("bond diagonal must be NONE");
    for (int j = 0; j < n; ++j) {
      const int b = mol.bond_type(i, j);
      if (b < 0 || b >= kNumBondTypes) throw ValidationError("invalid bond category");
      if (b != mol.bond_type(j, i)) throw ValidationError("bond matrix is not symmetric");
    }
  }
}

Eigen::RowVector3d centroid(const Coords& x, const std::vector<int>& rows) {
  Eigen::RowVector3d c = Eigen::RowVector3d::Zero();
  if (rows.empty()) return c;
  for (int r : rows) c += x.row(r);
  return c / static_cast<double>(rows.size());
}

// ---------------------------------------------------------------- PDB

PdbParseResult parse_pdb_pocket(std::istream& in, const AtomVocab& vocab, std::string pocket_id) {
  PdbParseResult res;
  res.pocket.pocket_id = std::move(pocket_id);
  std::vector<Eigen::RowVector3d> xs;
  std::string line;
  int lineno = 0;
  char first_altloc = ' ';
  while (getline_stripped(in, line)) {
    ++lineno;
    const std::string_view rec = column(line, 0, 6);
    if (rec != "ATOM  " && rec != "HETATM" && trim(rec) != "ATOM" && trim(rec) != "HETATM") continue;
    const char altloc = line.size() > 16 ? line[16] : ' ';
    if (altloc != ' ') {
      if (first_altloc == ' ') first_altloc = altloc;
      if (altloc != first_altloc) continue;
    }
    Eigen::RowVector3d p;
    for (int k = 0; k < 3; ++k) {
      auto v = to_double(column(line, 30 + 8 * static_cast<std::size_t>(k), 8));
      if (!v) throw ParseError("malformed coordinate field in PDB record", lineno);
      p(k) = *v;
    }
    std::string_view elem = trim(column(line, 76, 2));
    std::string fallback;
    if (elem.empty()) {
      for (char c : column(line, 12, 4)) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
          fallback.push_back(c);
          break;
        }
      }
      elem = fallback;
    }
    auto type = vocab.index_of(elem);
    if (!type) {
      ++res.skipped_unknown;
      continue;
    }
    xs.push_back(p);
    res.pocket.atom_type.push_back(*type);
  }
  if (xs.empty()) throw ParseError("pocket contains no accepted ATOM/HETATM records", 0);
  res.pocket.x.resize(static_cast<Eigen::Index>(xs.size()), 3);
  for (std::size_t i = 0; i < xs.size(); ++i) res.pocket.x.row(static_cast<Eigen::Index>(i)) = xs[i];
  return res;
}

std::string write_pdb_pocket(const PocketContext& pocket, const AtomVocab& vocab) {
  std::string out;
  char buf[128];
  for (int i = 0; i < pocket.size(); ++i) {
    const std::string& el = vocab.symbol(pocket.atom_type[static_cast<std::size_t>(i)]);
    std::string name = el.size() == 1 ? " " + el + "  " : el + "  ";
    std::string upper = el;
    for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    std::snprintf(buf, sizeof(buf), "ATOM  %5d %-4s RES A%4d    %8.3f%8.3f%8.3f  1.00  0.00          %2s\n",
                  i + 1, name.c_str(), 1, pocket.x(i, 0), pocket.x(i, 1), pocket.x(i, 2), upper.c_str());
    out += buf;
  }
  out += "END\n";
  return out;
}

// ---------------------------------------------------------------- SDF

Molecule3D parse_sdf_molecule(std::istream& in, const AtomVocab& vocab) {
  std::string line;
  int lineno = 0;
  for (int i = 0; i < 3; ++i) {
    if (!getline_stripped(in, line)) throw ParseError("truncated SDF header", lineno + 1);
    ++lineno;
  }
  if (!getline_stripped(in, line)) throw ParseError("missing counts line", lineno + 1);
  ++lineno;
  auto n_atoms = to_int(column(line, 0, 3));
  auto n_bonds = to_int(column(line, 3, 3));
  if (!n_atoms || !n_bonds || *n_atoms < 0 || *n_bonds < 0) throw ParseError("malformed counts line", lineno);
  if (line.find("V3000") != std::string::npos) throw ParseError("V3000 connection tables are not supported", lineno);

  Molecule3D mol(*n_atoms);
  for (int i = 0; i < *n_atoms; ++i) {
    if (!getline_stripped(in, line) || line.rfind("M  ", 0) == 0) {
      throw ParseError("counts line declares " + std::to_string(*n_atoms) + " atoms but the atom block has " +
                           std::to_string(i),
                       lineno + 1);
    }
    ++lineno;
    std::istringstream ss(line);
    std::string sx, sy, sz, sym;
    ss >> sx >> sy >> sz >> sym;
    auto x = to_double(sx);
    auto y = to_double(sy);
    auto z = to_double(sz);
    if (!x || !y || !z || sym.empty()) {
      throw ParseError("malformed atom line (counts line inconsistent with atom block?)", lineno);
    }
    auto type = vocab.index_of(sym);
    if (!type) throw ParseError("element '" + sym + "' is not in the atom vocabulary", lineno);
    mol.x.row(i) << *x, *y, *z;
    mol.atom_type[static_cast<std::size_t>(i)] = *type;
  }
  for (int k = 0; k < *n_bonds; ++k) {
    if (!getline_stripped(in, line) || line.rfind("M  ", 0) == 0) {
      throw ParseError("counts line declares " + std::to_string(*n_bonds) + " bonds but the bond block has " +
                           std::to_string(k),
                       lineno + 1);
    }
    ++lineno;
    auto a = to_int(column(line, 0, 3));
    auto b = to_int(column(line, 3, 3));
    auto order = to_int(column(line, 6, 3));
    if (!a || !b || !order) throw ParseError("malformed bond line", lineno);
    if (*a < 1 || *a > *n_atoms || *b < 1 || *b > *n_atoms || *a == *b) {
      throw ParseError("bond references atom index out of range", lineno);
    }
    Bond bt;
    switch (*order) {
      case 1: bt = Bond::kSingle; break;
      case 2: bt = Bond::kDouble; break;
      case 3: bt = Bond::kTriple; break;
      case 4: bt = Bond::kAromatic; break;
      default: throw ParseError("unsupported bond order " + std::to_string(*order), lineno);
    }
    mol.set_bond(*a - 1, *b - 1, bt);
  }
  bool ended = false;
  while (getline_stripped(in, line)) {
    ++lineno;
    if (line.rfind("M  END", 0) == 0) {
      ended = true;
      break;
    }
    if (line.rfind("M  ", 0) != 0 && line.rfind("A  ", 0) != 0 && line.rfind("V  ", 0) != 0 &&
        line.rfind("G  ", 0) != 0) {
      throw ParseError("unexpected line after bond block (counts line inconsistent with bond block?)", lineno);
    }
  }
  if (!ended) throw ParseError("missing 'M  END'", lineno);
  return mol;
}

std::string write_sdf(const Molecule3D& mol, const AtomVocab& vocab, std::string_view title) {
  check_molecule(mol, vocab);
  for (int t : mol.atom_type) {
    if (vocab.is_fake(t)) throw ValidationError("molecule contains FAKE atoms; call strip_fake before writing");
  }
  const int n = mol.size();
  int nb = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) nb += mol.bond(i, j) != Bond::kNone;
  }
  if (n > 999 || nb > 999) throw ValidationError("molecule too large for a V2000 block");
  std::string out;
  out += std::string(title) + "\n  leop          3D\n\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%3d%3d  0  0  0  0  0  0  0  0999 V2000\n", n, nb);
  out += buf;
  for (int i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof(buf), "%10.4f%10.4f%10.4f %-3s 0  0  0  0  0  0  0  0  0  0  0  0\n", mol.x(i, 0),
                  mol.x(i, 1), mol.x(i, 2), vocab.symbol(mol.atom_type[static_cast<std::size_t>(i)]).c_str());
    out += buf;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const int b = mol.bond_type(i, j);
      if (b == 0) continue;
      std::snprintf(buf, sizeof(buf), "%3d%3d%3d  0\n", i + 1, j + 1, b);
      out += buf;
    }
  }
  out += "M  END\n$$$$\n";
  return out;
}

// ---------------------------------------------------------------- masking

LigandPartition partition_retain_mask(const Molecule3D& mol, const std::vector<int>& mask_indices) {
  const int n = mol.size();
  if (mask_indices.empty()) throw ValidationError("partition: mask is empty");
  LigandPartition part;
  part.ligand = mol;
  part.mask.assign(static_cast<std::size_t>(n), false);
  for (int i : mask_indices) {
    if (i < 0 || i >= n) throw ValidationError("partition: mask index " + std::to_string(i) + " out of range");
    part.mask[static_cast<std::size_t>(i)] = true;
  }
  if (part.n_mask() == n) throw ValidationError("partition: mask covers every atom; nothing is retained");
  return part;
}

LigandPartition pad_with_fake_atoms(const LigandPartition& part, int n_max, const AtomVocab& vocab) {
  const int cur = part.n_mask();
  if (n_max < cur) {
    throw ValidationError("pad: n_max " + std::to_string(n_max) + " is below the mask size " + std::to_string(cur));
  }
  const int extra = n_max - cur;
  if (extra == 0) return part;
  const Molecule3D& src = part.ligand;
  const int n = src.size();
  LigandPartition out;
  out.ligand = Molecule3D(n + extra);
  out.ligand.x.topRows(n) = src.x;
  const Eigen::RowVector3d c = centroid(src.x, part.retained_indices());
  for (int k = 0; k < extra; ++k) out.ligand.x.row(n + k) = c;
  for (int i = 0; i < n; ++i) out.ligand.atom_type[static_cast<std::size_t>(i)] = src.atom_type[static_cast<std::size_t>(i)];
  for (int k = 0; k < extra; ++k) out.ligand.atom_type[static_cast<std::size_t>(n + k)] = vocab.fake();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) out.ligand.set_bond_type(i, j, src.bond_type(i, j));
  }
  out.mask = part.mask;
  out.mask.resize(static_cast<std::size_t>(n + extra), true);
  return out;
}

int count_components(const Molecule3D& mol, const std::vector<int>& atoms) {
  std::vector<char> in(static_cast<std::size_t>(mol.size()), 0);
  for (int a : atoms) in[static_cast<std::size_t>(a)] = 1;
  std::vector<char> seen(static_cast<std::size_t>(mol.size()), 0);
  int comps = 0;
  for (int s : atoms) {
    if (seen[static_cast<std::size_t>(s)]) continue;
    ++comps;
    std::queue<int> q;
    q.push(s);
    seen[static_cast<std::size_t>(s)] = 1;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v = 0; v < mol.size(); ++v) {
        if (in[static_cast<std::size_t>(v)] && !seen[static_cast<std::size_t>(v)] && mol.bond(u, v) != Bond::kNone) {
          seen[static_cast<std::size_t>(v)] = 1;
          q.push(v);
        }
      }
    }
  }
  return comps;
}

// ---------------------------------------------------------------- toy data

std::optional<double> max_valence(std::string_view symbol) {
  const std::string s = normalize_symbol(symbol);
  if (s == "C") return 4.0;
  if (s == "N") return 3.0;
  if (s == "O") return 2.0;
  if (s == "F") return 1.0;
  if (s == "S") return 6.0;
  if (s == "Cl") return 1.0;
  return std::nullopt;
}

double bond_order(Bond b) {
  switch (b) {
    case Bond::kNone: return 0.0;
    case Bond::kSingle: return 1.0;
    case Bond::kDouble: return 2.0;
    case Bond::kTriple: return 3.0;
    case Bond::kAromatic: return 1.5;
  }
  return 0.0;
}

void ToyDatasetSpec::validate() const {
  auto bad = [](const std::string& field, const std::string& why) {
    throw ValidationError("toy dataset spec field '" + field + "': " + why);
  };
  if (n_complexes < 1) bad("n_complexes", "must be at least 1");
  if (pocket_size.lo < 1 || pocket_size.hi < pocket_size.lo) bad("pocket_size_range", "must be a non-empty range >= 1");
  if (ligand_size.lo < 3 || ligand_size.hi < ligand_size.lo) bad("ligand_size_range", "must be a non-empty range >= 3");
  if (ligand_size.hi > 64) bad("ligand_size_range", "upper bound above 64 atoms");
  if (mask_fraction.lo <= 0 || mask_fraction.hi >= 1 || mask_fraction.hi < mask_fraction.lo) {
    bad("mask_fraction_range", "must be a non-empty range inside (0, 1)");
  }
  if (!(contact_radius > 0)) bad("contact_radius", "must be positive");
  if (linker_fraction < 0 || linker_fraction > 1) bad("linker_fraction", "must lie in [0, 1]");
}

namespace {

using Rng = std::mt19937_64;

Eigen::RowVector3d random_unit(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::RowVector3d v;
  do {
    v << n(rng), n(rng), n(rng);
  } while (v.norm() < 1e-6);
  return v.normalized();
}

int uniform_int(Rng& rng, double lo, double hi) {
  std::uniform_int_distribution<int> d(static_cast<int>(std::lround(lo)), static_cast<int>(std::lround(hi)));
  return d(rng);
}

struct Growth {
  Molecule3D mol{0};
  std::vector<double> used;
  std::vector<int> degree;
};

int max_degree(std::string_view sym) {
  if (sym == "C") return 4;
  if (sym == "N") return 3;
  if (sym == "O" || sym == "S") return 2;
  return 1;
}

double growth_cap(std::string_view sym) {
  // S limited to divalent in generated data.
  if (sym == "S") return 2.0;
  return *max_valence(sym);
}

std::optional<Molecule3D> grow_ligand(Rng& rng, int n, const AtomVocab& vocab) {
  std::vector<Eigen::RowVector3d> pos;
  std::vector<int> type;
  std::vector<double> used;
  std::vector<int> deg;
  std::vector<std::tuple<int, int, Bond>> edges;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int iC = *vocab.index_of("C");

  auto sym = [&](int i) -> const std::string& { return vocab.symbol(type[static_cast<std::size_t>(i)]); };

  if (n >= 6 && u01(rng) < 0.5) {
    const Eigen::RowVector3d a = random_unit(rng);
    Eigen::RowVector3d b = random_unit(rng);
    b = (b - b.dot(a) * a).normalized();
    const int n_pos = (u01(rng) < 0.3 && vocab.index_of("N")) ? static_cast<int>(u01(rng) * 6) : -1;
    for (int k = 0; k < 6; ++k) {
      const double th = k * std::numbers::pi / 3.0;
      pos.push_back(1.40 * (std::cos(th) * a + std::sin(th) * b));
      type.push_back(k == n_pos ? *vocab.index_of("N") : iC);
      used.push_back(3.0);
      deg.push_back(2);
    }
    for (int k = 0; k < 6; ++k) edges.emplace_back(k, (k + 1) % 6, Bond::kAromatic);
  } else {
    pos.push_back(Eigen::RowVector3d::Zero());
    type.push_back(iC);
    used.push_back(0.0);
    deg.push_back(0);
  }

  const std::vector<std::pair<std::string, double>> weights = {{"C", 0.60}, {"N", 0.15}, {"O", 0.15},
                                                               {"F", 0.04}, {"S", 0.03}, {"Cl", 0.03}};
  while (static_cast<int>(pos.size()) < n) {
    std::vector<int> parents;
    for (int i = 0; i < static_cast<int>(pos.size()); ++i) {
      if (growth_cap(sym(i)) - used[static_cast<std::size_t>(i)] >= 1.0 &&
          deg[static_cast<std::size_t>(i)] < max_degree(sym(i))) {
        parents.push_back(i);
      }
    }
    if (parents.empty()) return std::nullopt;
    std::shuffle(parents.begin(), parents.end(), rng);
    bool placed = false;
    for (int p : parents) {
      double r = u01(rng) * 1.0;
      std::string el = "C";
      for (const auto& [e, w] : weights) {
        if (r < w) {
          el = e;
          break;
        }
        r -= w;
      }
      auto t = vocab.index_of(el);
      if (!t) t = iC;
      const double spare_p = growth_cap(sym(p)) - used[static_cast<std::size_t>(p)];
      Bond order = Bond::kSingle;
      if (spare_p >= 2.0 && growth_cap(vocab.symbol(*t)) >= 2.0 && u01(rng) < 0.25) order = Bond::kDouble;
      const double len = order == Bond::kDouble ? 1.34 : 1.50;
      for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
        const Eigen::RowVector3d cand = pos[static_cast<std::size_t>(p)] + len * random_unit(rng);
        bool ok = true;
        for (int q = 0; q < static_cast<int>(pos.size()) && ok; ++q) {
          if (q != p && (pos[static_cast<std::size_t>(q)] - cand).norm() < 2.3) ok = false;
        }
        if (!ok) continue;
        const int id = static_cast<int>(pos.size());
        pos.push_back(cand);
        type.push_back(*t);
        used.push_back(bond_order(order));
        deg.push_back(1);
        used[static_cast<std::size_t>(p)] += bond_order(order);
        deg[static_cast<std::size_t>(p)] += 1;
        edges.emplace_back(p, id, order);
        placed = true;
      }
      if (placed) break;
    }
    if (!placed) return std::nullopt;
  }

  Molecule3D mol(n);
  for (int i = 0; i < n; ++i) {
    mol.x.row(i) = pos[static_cast<std::size_t>(i)];
    mol.atom_type[static_cast<std::size_t>(i)] = type[static_cast<std::size_t>(i)];
  }
  for (auto [a, b, o] : edges) mol.set_bond(a, b, o);
  return mol;
}

std::vector<int> bfs_order(const Molecule3D& mol, int root) {
  std::vector<int> order;
  std::vector<char> seen(static_cast<std::size_t>(mol.size()), 0);
  std::queue<int> q;
  q.push(root);
  seen[static_cast<std::size_t>(root)] = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    order.push_back(u);
    for (int v = 0; v < mol.size(); ++v) {
      if (!seen[static_cast<std::size_t>(v)] && mol.bond(u, v) != Bond::kNone) {
        seen[static_cast<std::size_t>(v)] = 1;
        q.push(v);
      }
    }
  }
  return order;
}

std::vector<int> shortest_path(const Molecule3D& mol, int a, int b) {
  std::vector<int> prev(static_cast<std::size_t>(mol.size()), -1);
  std::vector<char> seen(static_cast<std::size_t>(mol.size()), 0);
  std::queue<int> q;
  q.push(a);
  seen[static_cast<std::size_t>(a)] = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v = 0; v < mol.size(); ++v) {
      if (!seen[static_cast<std::size_t>(v)] && mol.bond(u, v) != Bond::kNone) {
        seen[static_cast<std::size_t>(v)] = 1;
        prev[static_cast<std::size_t>(v)] = u;
        q.push(v);
      }
    }
  }
  std::vector<int> path;
  for (int v = b; v != -1; v = prev[static_cast<std::size_t>(v)]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

// Component label of each atom after deleting `removed`; -1 for removed atoms.
std::vector<int> component_labels(const Molecule3D& mol, const std::vector<char>& removed) {
  std::vector<int> label(static_cast<std::size_t>(mol.size()), -1);
  int next = 0;
  for (int s = 0; s < mol.size(); ++s) {
    if (removed[static_cast<std::size_t>(s)] || label[static_cast<std::size_t>(s)] >= 0) continue;
    std::queue<int> q;
    q.push(s);
    label[static_cast<std::size_t>(s)] = next;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v = 0; v < mol.size(); ++v) {
        if (!removed[static_cast<std::size_t>(v)] && label[static_cast<std::size_t>(v)] < 0 &&
            mol.bond(u, v) != Bond::kNone) {
          label[static_cast<std::size_t>(v)] = next;
          q.push(v);
        }
      }
    }
    ++next;
  }
  return label;
}

std::optional<std::vector<int>> linker_mask(const Molecule3D& mol, int target, Rng& rng) {
  const auto o1 = bfs_order(mol, 0);
  const int a = o1.back();
  const auto o2 = bfs_order(mol, a);
  const int b = o2.back();
  const auto path = shortest_path(mol, a, b);
  const int len = static_cast<int>(path.size());
  if (len < 3) return std::nullopt;
  std::vector<std::vector<int>> best;
  int best_gap = 1 << 30;
  for (int seg = 1; seg <= len - 2; ++seg) {
    for (int start = 1; start + seg <= len - 1; ++start) {
      std::vector<char> removed(static_cast<std::size_t>(mol.size()), 0);
      for (int k = start; k < start + seg; ++k) removed[static_cast<std::size_t>(path[static_cast<std::size_t>(k)])] = 1;
      const auto label = component_labels(mol, removed);
      const int la = label[static_cast<std::size_t>(a)];
      const int lb = label[static_cast<std::size_t>(b)];
      if (la == lb) continue;
      std::vector<int> m;
      for (int i = 0; i < mol.size(); ++i) {
        const int l = label[static_cast<std::size_t>(i)];
        if (l != la && l != lb) m.push_back(i);
      }
      const int gap = std::abs(static_cast<int>(m.size()) - target);
      if (gap < best_gap) {
        best_gap = gap;
        best.clear();
      }
      if (gap == best_gap) best.push_back(std::move(m));
    }
  }
  if (best.empty()) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick(0, best.size() - 1);
  return best[pick(rng)];
}

}  // namespace

ToyComplex gen_toy_complex(std::uint64_t seed, const ToyDatasetSpec& spec, const AtomVocab& vocab) {
  spec.validate();
  Rng rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int n_lig = uniform_int(rng, spec.ligand_size.lo, spec.ligand_size.hi);

  std::optional<Molecule3D> lig;
  for (int attempt = 0; attempt < 1000 && !lig; ++attempt) lig = grow_ligand(rng, n_lig, vocab);
  if (!lig) throw Error("toy generator could not grow a ligand");

  ToyComplex out;
  out.ligand = std::move(*lig);
  std::vector<int> all(static_cast<std::size_t>(n_lig));
  for (int i = 0; i < n_lig; ++i) all[static_cast<std::size_t>(i)] = i;
  const Eigen::RowVector3d c = centroid(out.ligand.x, all);
  const Eigen::RowVector3d offset = random_unit(rng) * u01(rng);
  out.ligand.x.rowwise() -= c;
  out.ligand.x.rowwise() += offset;

  // Pocket: a cap of atoms on a shell around the ligand, open towards -z.
  const int n_p = uniform_int(rng, spec.pocket_size.lo, spec.pocket_size.hi);
  const double lig_radius = out.ligand.x.rowwise().norm().maxCoeff();
  out.pocket.x.resize(n_p, 3);
  out.pocket.atom_type.resize(static_cast<std::size_t>(n_p));
  const std::vector<std::pair<std::string, double>> pocket_weights = {{"C", 0.50}, {"N", 0.20}, {"O", 0.25}, {"S", 0.05}};
  for (int i = 0; i < n_p; ++i) {
    Eigen::RowVector3d p = Eigen::RowVector3d::Zero();
    for (int attempt = 0; attempt < 500; ++attempt) {
      Eigen::RowVector3d d = random_unit(rng);
      if (d(2) < -0.3) continue;
      p = d * (lig_radius + 3.0 + 1.5 * u01(rng));
      double dmin_l = 1e9;
      for (int a = 0; a < n_lig; ++a) dmin_l = std::min(dmin_l, (out.ligand.x.row(a) - p).norm());
      double dmin_p = 1e9;
      for (int q = 0; q < i; ++q) dmin_p = std::min(dmin_p, (out.pocket.x.row(q) - p).norm());
      if (dmin_l >= 3.0 && dmin_p >= 2.0) break;
    }
    out.pocket.x.row(i) = p;
    double r = u01(rng);
    int t = *vocab.index_of("C");
    for (const auto& [e, w] : pocket_weights) {
      if (r < w) {
        if (auto k = vocab.index_of(e)) t = *k;
        break;
      }
      r -= w;
    }
    out.pocket.atom_type[static_cast<std::size_t>(i)] = t;
  }
  out.pocket.pocket_id = "toy-" + std::to_string(seed);

  std::uniform_real_distribution<double> frac(spec.mask_fraction.lo, spec.mask_fraction.hi);
  const int m = std::clamp(static_cast<int>(std::lround(frac(rng) * n_lig)), 1, n_lig - 1);
  const bool want_linker = u01(rng) < spec.linker_fraction;
  std::optional<std::vector<int>> mask;
  if (want_linker) mask = linker_mask(out.ligand, m, rng);
  if (mask && !mask->empty() && static_cast<int>(mask->size()) < n_lig) {
    out.task = MaskTask::kLinker;
  } else {
    std::uniform_int_distribution<int> root(0, n_lig - 1);
    const auto order = bfs_order(out.ligand, root(rng));
    mask = std::vector<int>(order.end() - m, order.end());
    out.task = MaskTask::kScaffold;
  }
  std::sort(mask->begin(), mask->end());
  out.mask_indices = std::move(*mask);
  return out;
}

std::vector<ToyComplex> gen_toy_dataset(const ToyDatasetSpec& spec, const AtomVocab& vocab) {
  spec.validate();
  std::vector<ToyComplex> out;
  out.reserve(static_cast<std::size_t>(spec.n_complexes));
  for (int i = 0; i < spec.n_complexes; ++i) {
    out.push_back(gen_toy_complex(derive_seed(spec.random_seed, static_cast<std::uint64_t>(i)), spec, vocab));
  }
  return out;
}

// ---------------------------------------------------------------- oracle

double oracle_affinity(const PocketContext& pocket, const Molecule3D& mol, const AtomVocab& vocab,
                       const OracleConstants& k) {
  if (mol.size() == 0) throw ValidationError("oracle: empty ligand");
  for (int t : mol.atom_type) {
    if (vocab.is_fake(t)) throw ValidationError("oracle: ligand contains FAKE atoms");
  }
  const double w = 0.5 * k.contact_radius;
  const double inv2w2 = 1.0 / (2.0 * w * w);
  double total = 0.0;
  for (int i = 0; i < mol.size(); ++i) {
    double count = 0.0;
    double steric = 0.0;
    for (int j = 0; j < pocket.size(); ++j) {
      const double d = (mol.x.row(i) - pocket.x.row(j)).norm();
      count += std::exp(-d * d * inv2w2);
      const double overlap = std::max(0.0, k.steric_distance - d);
      steric += overlap * overlap;
    }
    total += count / (count + k.saturation) - k.steric_weight * steric;
  }
  return std::clamp(total / mol.size(), 0.0, 1.0);
}

}  // namespace leop::chem
