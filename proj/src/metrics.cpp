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

#include "leop/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <queue>
#include <sstream>

#include <json.hpp>

#include "leop/crippen_table.hpp"
#include "leop/error.hpp"
#include "leop/weights.hpp"

namespace leop::metrics {

using chem::Bond;
using chem::Molecule3D;

namespace {

const std::map<std::string, double>& atomic_masses() {
  static const std::map<std::string, double> m = {{"C", 12.011}, {"N", 14.007}, {"O", 15.999},
                                                  {"F", 18.998}, {"S", 32.06},  {"Cl", 35.45}};
  return m;
}
constexpr double kHydrogenMass = 1.008;

const std::string& element(const Molecule3D& mol, const chem::AtomVocab& vocab, int a) {
  const int type = mol.atom_type[static_cast<std::size_t>(a)];
  if (type < 0 || type >= vocab.size()) throw ValidationError("metrics: atom type out of range");
  if (vocab.is_fake(type)) throw ValidationError("metrics: FAKE atom present; strip fakes first");
  return vocab.symbol(type);
}

double max_valence_of(const std::string& sym) {
  const auto v = chem::max_valence(sym);
  if (!v) throw ValidationError("metrics: no valence entry for element '" + sym + "'");
  return *v;
}

double valence_sum(const Molecule3D& mol, int a) {
  double s = 0;
  for (int b = 0; b < mol.size(); ++b) {
    if (b != a) s += chem::bond_order(mol.bond(a, b));
  }
  return s;
}

int degree(const Molecule3D& mol, int a) {
  int d = 0;
  for (int b = 0; b < mol.size(); ++b) d += (b != a && mol.bond(a, b) != Bond::kNone);
  return d;
}

bool connected_without(const Molecule3D& mol, int from, int to, int skip_a, int skip_b) {
  std::vector<char> seen(static_cast<std::size_t>(mol.size()), 0);
  std::queue<int> q;
  q.push(from);
  seen[static_cast<std::size_t>(from)] = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    if (u == to) return true;
    for (int v = 0; v < mol.size(); ++v) {
      if (seen[static_cast<std::size_t>(v)] || v == u || mol.bond(u, v) == Bond::kNone) continue;
      if ((u == skip_a && v == skip_b) || (u == skip_b && v == skip_a)) continue;
      seen[static_cast<std::size_t>(v)] = 1;
      q.push(v);
    }
  }
  return false;
}

std::string cell_key(const std::string& e, bool aromatic, int bucket) {
  return e + "/" + (aromatic ? "1" : "0") + "/" + std::to_string(bucket);
}

}  // namespace

bool valence_validity(const Molecule3D& mol, const chem::AtomVocab& vocab) {
  if (mol.size() == 0) return false;
  for (int a = 0; a < mol.size(); ++a) {
    if (valence_sum(mol, a) > max_valence_of(element(mol, vocab, a)) + 1e-9) return false;
  }
  std::vector<int> all(static_cast<std::size_t>(mol.size()));
  std::iota(all.begin(), all.end(), 0);
  return chem::count_components(mol, all) == 1;
}

int implicit_hydrogens(const Molecule3D& mol, const chem::AtomVocab& vocab, int atom) {
  const double deficit = max_valence_of(element(mol, vocab, atom)) - valence_sum(mol, atom);
  return std::max(0, static_cast<int>(std::floor(deficit + 1e-9)));
}

// ---------------------------------------------------------------- logP

LogpTable LogpTable::parse(std::istream& in) {
  LogpTable t;
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first == "default") {
      std::string e;
      double v;
      if (!(ls >> e >> v)) throw ParseError("logP table: malformed default line", no);
      t.defaults_[e] = v;
      continue;
    }
    int aromatic = 0, bucket = 0;
    double v = 0;
    if (!(ls >> aromatic >> bucket >> v) || (aromatic != 0 && aromatic != 1) || bucket < 0 || bucket > 2) {
      throw ParseError("logP table: malformed cell line", no);
    }
    t.cells_[cell_key(first, aromatic == 1, bucket)] = v;
  }
  return t;
}

const LogpTable& LogpTable::builtin() {
  static const LogpTable table = [] {
    std::istringstream in(detail::kCrippenTable);
    return parse(in);
  }();
  return table;
}

bool LogpTable::has_cell(const std::string& e, bool aromatic, int bucket) const {
  return cells_.count(cell_key(e, aromatic, bucket)) > 0;
}

bool LogpTable::has_default(const std::string& e) const { return defaults_.count(e) > 0; }

double LogpTable::lookup(const std::string& e, bool aromatic, int bucket, bool* fallback) const {
  const auto it = cells_.find(cell_key(e, aromatic, std::min(bucket, 2)));
  if (it != cells_.end()) {
    if (fallback) *fallback = false;
    return it->second;
  }
  const auto d = defaults_.find(e);
  if (d == defaults_.end()) throw ValidationError("logP table: no entry or default for element '" + e + "'");
  if (fallback) *fallback = true;
  return d->second;
}

double crippen_logp(const Molecule3D& mol, const chem::AtomVocab& vocab, int* fallbacks, const LogpTable& table) {
  double total = 0;
  int fb = 0;
  for (int a = 0; a < mol.size(); ++a) {
    const std::string& e = element(mol, vocab, a);
    bool aromatic = false;
    int hetero = 0;
    for (int b = 0; b < mol.size(); ++b) {
      if (b == a || mol.bond(a, b) == Bond::kNone) continue;
      aromatic = aromatic || mol.bond(a, b) == Bond::kAromatic;
      hetero += element(mol, vocab, b) != "C";
    }
    bool used_default = false;
    total += table.lookup(e, aromatic, hetero, &used_default);
    fb += used_default;
  }
  if (fallbacks) *fallbacks += fb;
  return total;
}

// ---------------------------------------------------------------- Lipinski

double molecular_weight(const Molecule3D& mol, const chem::AtomVocab& vocab) {
  double mw = 0;
  for (int a = 0; a < mol.size(); ++a) {
    const std::string& e = element(mol, vocab, a);
    const auto it = atomic_masses().find(e);
    if (it == atomic_masses().end()) throw ValidationError("metrics: no mass for element '" + e + "'");
    mw += it->second + kHydrogenMass * implicit_hydrogens(mol, vocab, a);
  }
  return mw;
}

int rotatable_bonds(const Molecule3D& mol) {
  int n = 0;
  for (int a = 0; a < mol.size(); ++a) {
    for (int b = a + 1; b < mol.size(); ++b) {
      if (mol.bond(a, b) != Bond::kSingle) continue;
      if (degree(mol, a) < 2 || degree(mol, b) < 2) continue;
      if (connected_without(mol, a, b, a, b)) continue;  // ring bond
      ++n;
    }
  }
  return n;
}

Lipinski lipinski(const Molecule3D& mol, const chem::AtomVocab& vocab) {
  Lipinski l;
  l.mw = molecular_weight(mol, vocab);
  for (int a = 0; a < mol.size(); ++a) {
    const std::string& e = element(mol, vocab, a);
    if (e == "N" || e == "O") {
      ++l.hba;
      if (implicit_hydrogens(mol, vocab, a) > 0) ++l.hbd;
    }
  }
  l.logp = crippen_logp(mol, vocab);
  l.rotatable = rotatable_bonds(mol);
  l.count = (l.mw <= 500.0) + (l.hbd <= 5) + (l.hba <= 10) + (l.logp <= 5.0) + (l.rotatable <= 10);
  return l;
}

int lipinski_count(const Molecule3D& mol, const chem::AtomVocab& vocab) { return lipinski(mol, vocab).count; }

// ---------------------------------------------------------------- affinity

std::optional<double> high_affinity_pct(const std::vector<TargetScores>& targets, int* skipped) {
  long hits = 0, compared = 0;
  int skip = 0;
  for (const auto& t : targets) {
    if (!t.reference) {
      ++skip;
      continue;
    }
    std::vector<double> s = t.generated;
    std::sort(s.begin(), s.end(), std::greater<>());
    const std::size_t top = std::min<std::size_t>(5, s.size());
    for (std::size_t i = 0; i < top; ++i) hits += s[i] >= *t.reference;
    compared += static_cast<long>(top);
  }
  if (skipped) *skipped += skip;
  if (compared == 0) return std::nullopt;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(compared);
}

// ---------------------------------------------------------------- reports

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

EvalReport evaluate_run(const std::filesystem::path& run_dir, const std::map<std::string, double>& references,
                        const std::filesystem::path& out_dir) {
  const auto manifest_path = run_dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) {
    throw ValidationError("evaluate: no manifest at '" + manifest_path.string() + "'");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what(), 0);
  }
  chem::AtomVocab vocab = chem::AtomVocab::standard();
  if (manifest.contains("vocab")) {
    auto syms = manifest["vocab"].get<std::vector<std::string>>();
    if (!syms.empty() && syms.back() == "FAKE") syms.pop_back();
    vocab = chem::AtomVocab(syms);
  }

  EvalReport rep;
  std::vector<double> affinities, lip, logps;
  std::map<std::string, TargetScores> per_target;
  std::ostringstream csv;
  csv << "index,target,ligand_file,valid,oracle_affinity,affinity,logp,mw,hbd,hba,rotatable,lipinski\n";
  const auto& samples = manifest.at("samples");
  rep.n_samples = static_cast<int>(samples.size());
  for (const auto& row : samples) {
    const std::string target = row.value("target", std::string());
    TargetScores& ts = per_target[target];
    ts.target = target;
    if (auto it = references.find(target); it != references.end()) {
      ts.reference = it->second;
    } else if (row.contains("reference_affinity") && !row["reference_affinity"].is_null()) {
      ts.reference = row["reference_affinity"].get<double>();
    }
    if (row["ligand_file"].is_null()) {
      ++rep.n_empty;
      continue;
    }
    const std::string file = row["ligand_file"].get<std::string>();
    const auto path = run_dir / file;
    if (!std::filesystem::exists(path)) {
      rep.missing_files.push_back(file);
      continue;
    }
    ++rep.n_emitted;
    std::ifstream in(path);
    const Molecule3D mol = chem::parse_sdf_molecule(in, vocab);
    const bool valid = valence_validity(mol, vocab);
    rep.n_valid += valid;
    const std::optional<double> aff =
        row["oracle_affinity"].is_null() ? std::nullopt : std::optional<double>(row["oracle_affinity"].get<double>());
    if (aff) {
      affinities.push_back(*aff * chem::kAffinityDisplayScale);
      ts.generated.push_back(*aff);
    }
    csv << row.value("index", 0) << ',' << target << ',' << file << ',' << (valid ? 1 : 0) << ','
        << (aff ? fmt(*aff) : "") << ',' << (aff ? fmt(*aff * chem::kAffinityDisplayScale) : "") << ',';
    if (valid) {
      int fb = 0;
      const double lp = crippen_logp(mol, vocab, &fb);
      rep.logp_fallbacks += fb;
      const Lipinski l = lipinski(mol, vocab);
      lip.push_back(l.count);
      logps.push_back(lp);
      csv << fmt(lp) << ',' << fmt(l.mw) << ',' << l.hbd << ',' << l.hba << ',' << l.rotatable << ',' << l.count
          << '\n';
    } else {
      csv << ",,,,,\n";
    }
  }
  std::vector<TargetScores> targets;
  for (auto& [k, v] : per_target) targets.push_back(v);
  rep.high_affinity_pct = high_affinity_pct(targets, &rep.skipped_targets);
  rep.mean_affinity = mean_of(affinities);
  if (!affinities.empty()) {
    std::vector<double> s = affinities;
    std::sort(s.begin(), s.end());
    const std::size_t n = s.size();
    rep.median_affinity = n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
  }
  if (rep.n_emitted > 0) rep.validity_pct = 100.0 * rep.n_valid / rep.n_emitted;
  rep.mean_lipinski = mean_of(lip);
  rep.mean_logp = mean_of(logps);

  nlohmann::json j = {{"schema_version", 1},
                      {"n_samples", rep.n_samples},
                      {"n_emitted", rep.n_emitted},
                      {"n_empty", rep.n_empty},
                      {"n_valid", rep.n_valid},
                      {"validity_pct", opt(rep.validity_pct)},
                      {"mean_affinity", opt(rep.mean_affinity)},
                      {"median_affinity", opt(rep.median_affinity)},
                      {"affinity_scale", chem::kAffinityDisplayScale},
                      {"high_affinity_pct", opt(rep.high_affinity_pct)},
                      {"mean_lipinski", opt(rep.mean_lipinski)},
                      {"mean_logp", opt(rep.mean_logp)},
                      {"qed", nullptr},
                      {"sa", nullptr},
                      {"logp_fallbacks", rep.logp_fallbacks},
                      {"skipped_targets", rep.skipped_targets},
                      {"missing_files", rep.missing_files}};
  const auto dir = out_dir.empty() ? run_dir : out_dir;
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "report.json", j.dump(2) + "\n");
  write_file_atomic(dir / "report.csv", csv.str());
  return rep;
}

}  // namespace leop::metrics
