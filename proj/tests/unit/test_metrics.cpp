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


#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "leop/error.hpp"
#include "leop/metrics.hpp"

namespace leop::metrics {
namespace {

using chem::Bond;
using chem::Molecule3D;

const auto kVocab = chem::AtomVocab::standard();

int type(const char* sym) { return *kVocab.index_of(sym); }

Molecule3D chain(int n, const char* sym = "C") {
  Molecule3D m(n);
  for (int i = 0; i < n; ++i) {
    m.atom_type[static_cast<std::size_t>(i)] = type(sym);
    m.x.row(i) << 1.5 * i, 0, 0;
  }
  for (int i = 0; i + 1 < n; ++i) m.set_bond(i, i + 1, Bond::kSingle);
  return m;
}

Molecule3D benzene() {
  Molecule3D m = chain(6);
  for (int i = 0; i < 6; ++i) m.set_bond(i, (i + 1) % 6, Bond::kAromatic);
  return m;
}

TEST(Validity, MethanePattern) {
  Molecule3D m = chain(5);
  for (int i = 0; i + 1 < 5; ++i) m.set_bond(i, i + 1, Bond::kNone);
  for (int i = 1; i < 5; ++i) m.set_bond(0, i, Bond::kSingle);
  EXPECT_TRUE(valence_validity(m, kVocab));
  EXPECT_EQ(implicit_hydrogens(m, kVocab, 0), 0);
  EXPECT_EQ(implicit_hydrogens(m, kVocab, 1), 3);
}

TEST(Validity, OverValentCarbon) {
  Molecule3D m = chain(6);
  for (int i = 0; i + 1 < 6; ++i) m.set_bond(i, i + 1, Bond::kNone);
  for (int i = 1; i < 6; ++i) m.set_bond(0, i, Bond::kSingle);
  EXPECT_FALSE(valence_validity(m, kVocab));
  EXPECT_EQ(implicit_hydrogens(m, kVocab, 0), 0);
}

TEST(Validity, DisconnectedFragments) {
  Molecule3D m = chain(4);
  m.set_bond(1, 2, Bond::kNone);
  EXPECT_FALSE(valence_validity(m, kVocab));
}

TEST(Validity, AromaticCountsOneAndAHalf) {
  EXPECT_TRUE(valence_validity(benzene(), kVocab));
  Molecule3D o = chain(3, "O");
  o.set_bond(0, 1, Bond::kAromatic);
  EXPECT_FALSE(valence_validity(o, kVocab));
}

TEST(Validity, FakeAtomRejected) {
  Molecule3D m = chain(2);
  m.atom_type[1] = kVocab.fake();
  EXPECT_THROW(valence_validity(m, kVocab), ValidationError);
}

TEST(Logp, SingleCarbonIsOneCell) {
  EXPECT_DOUBLE_EQ(crippen_logp(chain(1), kVocab), 0.3900);
}

TEST(Logp, BenzeneHandSum) {
  EXPECT_NEAR(crippen_logp(benzene(), kVocab), 6 * 0.2811, 1e-12);
  EXPECT_NEAR(crippen_logp(benzene(), kVocab), 1.6866, 1e-12);
}

TEST(Logp, HeteroNeighbourBuckets) {
  // O-C-N: carbon sees two heteroatoms, O and N see only carbon.
  Molecule3D m = chain(3);
  m.atom_type = {type("O"), type("C"), type("N")};
  EXPECT_NEAR(crippen_logp(m, kVocab), 0.0087 + -0.0821 + -0.5906, 1e-12);
}

TEST(Logp, DisjointUnionIsAdditive) {
  const Molecule3D a = benzene(), b = chain(3, "N");
  Molecule3D u(a.size() + b.size());
  for (int i = 0; i < a.size(); ++i) {
    u.atom_type[static_cast<std::size_t>(i)] = a.atom_type[static_cast<std::size_t>(i)];
    for (int j = 0; j < a.size(); ++j) if (i < j) u.set_bond(i, j, a.bond(i, j));
  }
  for (int i = 0; i < b.size(); ++i) {
    u.atom_type[static_cast<std::size_t>(a.size() + i)] = b.atom_type[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < b.size(); ++j) u.set_bond(a.size() + i, a.size() + j, b.bond(i, j));
  }
  u.x.setZero();
  EXPECT_NEAR(crippen_logp(u, kVocab), crippen_logp(a, kVocab) + crippen_logp(b, kVocab), 1e-12);
}

TEST(Logp, MissingCellFallsBackAndCounts) {
  std::istringstream in("C 0 0 1.0\ndefault C 0.25\ndefault N -1\n");
  const LogpTable t = LogpTable::parse(in);
  int fb = 0;
  EXPECT_DOUBLE_EQ(crippen_logp(chain(2), kVocab, &fb, t), 2.0);
  EXPECT_EQ(fb, 0);
  EXPECT_DOUBLE_EQ(crippen_logp(benzene(), kVocab, &fb, t), 1.5);
  EXPECT_EQ(fb, 6);
  EXPECT_THROW(crippen_logp(chain(1, "O"), kVocab, nullptr, t), ValidationError);
}

TEST(Logp, EveryVocabularyCellResolves) {
  const LogpTable& t = LogpTable::builtin();
  for (int k = 0; k < kVocab.fake(); ++k) {
    const std::string& e = kVocab.symbol(k);
    for (int arom = 0; arom < 2; ++arom) {
      for (int bucket = 0; bucket < 3; ++bucket) {
        EXPECT_TRUE(t.has_cell(e, arom, bucket) || t.has_default(e)) << e << " " << arom << " " << bucket;
      }
    }
  }
}

TEST(Lipinski, EthaneSatisfiesAll) {
  const Lipinski l = lipinski(chain(2), kVocab);
  EXPECT_EQ(l.count, 5);
  EXPECT_EQ(l.rotatable, 0);
  EXPECT_NEAR(l.mw, 2 * 12.011 + 6 * 1.008, 1e-9);
}

TEST(Lipinski, FortyCarbonChain) {
  const Molecule3D m = chain(40);
  const Lipinski l = lipinski(m, kVocab);
  // 38 CH2 + 2 CH3 = 82 hydrogens.
  EXPECT_NEAR(l.mw, 40 * 12.011 + 82 * 1.008, 1e-9);
  EXPECT_NEAR(l.mw, 563.096, 1e-9);
  EXPECT_EQ(l.rotatable, 37);
  EXPECT_NEAR(l.logp, 40 * 0.39, 1e-9);
  EXPECT_EQ(l.hbd, 0);
  EXPECT_EQ(l.hba, 0);
  EXPECT_EQ(l.count, 2);
}

TEST(Lipinski, DonorsAndAcceptors) {
  Molecule3D m = chain(3);
  m.atom_type = {type("N"), type("C"), type("O")};
  const Lipinski l = lipinski(m, kVocab);
  EXPECT_EQ(l.hba, 2);
  EXPECT_EQ(l.hbd, 2);
  m.set_bond(1, 2, Bond::kDouble);
  EXPECT_EQ(lipinski(m, kVocab).hbd, 1);
}

TEST(Lipinski, RingBondsAreNotRotatable) {
  Molecule3D m = chain(6);
  m.set_bond(5, 0, Bond::kSingle);
  EXPECT_EQ(rotatable_bonds(m), 0);
  EXPECT_LE(lipinski_count(m, kVocab), 5);
}

TEST(HighAffinity, Extremes) {
  std::vector<TargetScores> t = {{"a", {0.1, 0.2, 0.3, 0.2, 0.1}, 0.5}};
  EXPECT_DOUBLE_EQ(*high_affinity_pct(t), 0.0);
  t[0].reference = 0.0;
  EXPECT_DOUBLE_EQ(*high_affinity_pct(t), 100.0);
}

TEST(HighAffinity, TwoTargetFixture) {
  // a: top five are 6,5,4,3,2; two reach 4.5. b: 0.3, 0.4, 0.5 reach 0.3.
  std::vector<TargetScores> t = {{"a", {1, 2, 3, 4, 5, 6}, 4.5},
                                 {"b", {0.1, 0.2, 0.3, 0.4, 0.5}, 0.3},
                                 {"c", {9, 9}, std::nullopt}};
  int skipped = 0;
  EXPECT_DOUBLE_EQ(*high_affinity_pct(t, &skipped), 50.0);
  EXPECT_EQ(skipped, 1);
  t[1].generated[0] = 0.35;
  EXPECT_DOUBLE_EQ(*high_affinity_pct(t), 60.0);
  EXPECT_FALSE(high_affinity_pct({t[2]}).has_value());
}

std::filesystem::path make_run(const std::string& name, bool with_samples) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  nlohmann::json rows = nlohmann::json::array();
  if (with_samples) {
    std::ofstream(dir / "a.sdf") << chem::write_sdf(chain(2), kVocab);
    std::ofstream(dir / "b.sdf") << chem::write_sdf(benzene(), kVocab);
    rows.push_back({{"index", 0}, {"target", "t"}, {"ligand_file", "a.sdf"}, {"oracle_affinity", 0.2}, {"reference_affinity", 0.3}});
    rows.push_back({{"index", 1}, {"target", "t"}, {"ligand_file", "b.sdf"}, {"oracle_affinity", 0.5}, {"reference_affinity", 0.3}});
    rows.push_back({{"index", 2}, {"target", "t"}, {"ligand_file", nullptr}, {"oracle_affinity", nullptr}});
    rows.push_back({{"index", 3}, {"target", "t"}, {"ligand_file", "gone.sdf"}, {"oracle_affinity", 0.9}});
  }
  std::ofstream(dir / "manifest.json") << nlohmann::json{{"samples", rows}}.dump(2);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(Report, EmptyRunHasNullAggregates) {
  const auto dir = make_run("leop_metrics_empty", false);
  const EvalReport r = evaluate_run(dir);
  EXPECT_EQ(r.n_emitted, 0);
  EXPECT_FALSE(r.mean_affinity.has_value());
  EXPECT_FALSE(r.validity_pct.has_value());
  const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  EXPECT_TRUE(j["mean_affinity"].is_null());
  std::filesystem::remove_all(dir);
}

TEST(Report, AggregatesMatchHandValues) {
  const auto dir = make_run("leop_metrics_run", true);
  const EvalReport r = evaluate_run(dir);
  EXPECT_EQ(r.n_samples, 4);
  EXPECT_EQ(r.n_emitted, 2);
  EXPECT_EQ(r.n_empty, 1);
  EXPECT_EQ(r.missing_files, (std::vector<std::string>{"gone.sdf"}));
  EXPECT_NEAR(*r.mean_affinity, chem::kAffinityDisplayScale * (0.2 + 0.5) / 2, 1e-12);
  EXPECT_NEAR(*r.validity_pct, 100.0, 1e-12);
  EXPECT_NEAR(*r.high_affinity_pct, 50.0, 1e-12);
  EXPECT_NEAR(*r.mean_logp, (2 * 0.39 + 6 * 0.2811) / 2, 1e-12);
  const std::string first = slurp(dir / "report.json"), csv = slurp(dir / "report.csv");
  evaluate_run(dir);
  EXPECT_EQ(slurp(dir / "report.json"), first);
  EXPECT_EQ(slurp(dir / "report.csv"), csv);
  const EvalReport over = evaluate_run(dir, {{"t", 0.1}});
  EXPECT_NEAR(*over.high_affinity_pct, 100.0, 1e-12);
  std::filesystem::remove_all(dir);
}

TEST(Report, MissingManifestIsAnError) {
  EXPECT_THROW(evaluate_run(std::filesystem::temp_directory_path() / "leop_no_such_run"), ValidationError);
}

}  // namespace
}  // namespace leop::metrics
