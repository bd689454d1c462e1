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

#include <cmath>
#include <filesystem>
#include <fstream>

#include "../test_util.hpp"
#include "leop/error.hpp"
#include "leop/sampler.hpp"

namespace leop::sampler {
namespace {

const auto kVocab = chem::AtomVocab::standard();

struct Bench {
  egnn::ModelParams params;
  NoiseSchedule s = NoiseSchedule::polynomial(8, 2.0);
  chem::ToyComplex c;
  chem::LigandPartition part;
};

Bench make_setup(std::uint64_t seed = 1) {
  Bench u;
  u.params = egnn::ModelParams::init(testing::tiny_config(), kVocab, seed);
  testing::randomize(u.params, seed + 1, 0.2);
  chem::ToyDatasetSpec spec;
  spec.n_complexes = 1;
  spec.random_seed = seed;
  u.c = chem::gen_toy_dataset(spec, kVocab).front();
  u.part = chem::partition_retain_mask(u.c.ligand, u.c.mask_indices);
  return u;
}

SampleRunConfig run_config(int n, bool guided) {
  SampleRunConfig c;
  c.n_samples = n;
  c.seed = 42;
  c.threads = 1;
  c.guidance.enabled = guided;
  return c;
}

TEST(Prior, CategoryFrequenciesAreUniform) {
  diffusion::Rng rng(1);
  const int n = 100000, K = 5;
  const NoisedState st = sample_prior(n, 0, Eigen::RowVector3d(1, 2, 3), K, 5, rng);
  const Eigen::RowVectorXd freq = st.v.colwise().sum() / n;
  const double se = std::sqrt(0.2 * 0.8 / n);
  for (int k = 0; k < K; ++k) EXPECT_NEAR(freq(k), 0.2, 3 * se);
  const Eigen::RowVector3d mean = st.x.colwise().mean();
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(mean(c), c + 1.0, 3.0 / std::sqrt(n));
  EXPECT_EQ(st.b.rows(), 0);
}

TEST(Prior, SameSeedSameDraw) {
  diffusion::Rng a(9), b(9);
  const auto sa = sample_prior(4, 6, Eigen::RowVector3d::Zero(), 7, 5, a);
  const auto sb = sample_prior(4, 6, Eigen::RowVector3d::Zero(), 7, 5, b);
  EXPECT_EQ(sa.x, sb.x);
  EXPECT_EQ(sa.v, sb.v);
  EXPECT_EQ(sa.b, sb.b);
  EXPECT_THROW(sample_prior(0, 0, Eigen::RowVector3d::Zero(), 7, 5, a), ValidationError);
}

TEST(Reverse, PerfectOracleOnOneStepSchedule) {
  diffusion::Rng rng(3);
  const NoisedState st = sample_prior(4, 6, Eigen::RowVector3d::Zero(), 7, 5, rng);
  NoisedState in = st;
  in.t = 1;
  Prediction truth;
  truth.x0_hat = ad::Mat::Random(4, 3);
  truth.v_hat = diffusion::onehot({0, 3, 6, 2}, 7);
  truth.b_hat = diffusion::onehot({0, 1, 2, 3, 4, 0}, 5);
  ReverseCoefs c;
  c.beta_tilde = 0;
  c.coef_xt = 0;
  c.coef_x0 = 1;
  c.keep_step = 0.01;
  c.keep_prev = 1;
  c.final_step = true;
  const NoisedState out = reverse_step(in, c, truth, nullptr, affinity::GuidanceConfig{}, rng);
  EXPECT_EQ(out.t, 0);
  EXPECT_EQ(out.x, truth.x0_hat);
  EXPECT_EQ(out.v, truth.v_hat);
  EXPECT_EQ(out.b, truth.b_hat);
}

TEST(Reverse, CoefficientsFromSchedule) {
  const NoiseSchedule s = NoiseSchedule::polynomial(10, 2.0);
  const ReverseCoefs c = ReverseCoefs::at(s, 1);
  EXPECT_TRUE(c.final_step);
  EXPECT_FALSE(ReverseCoefs::at(s, 2).final_step);
  EXPECT_DOUBLE_EQ(c.keep_prev, std::sqrt(s.alpha(0)));
}

TEST(Reverse, ZeroScalesMatchUnguidedDraws) {
  diffusion::Rng r0(4);
  NoisedState st = sample_prior(3, 3, Eigen::RowVector3d::Zero(), 7, 5, r0);
  st.t = 5;
  const NoiseSchedule s = NoiseSchedule::polynomial(10, 2.0);
  Prediction pred{ad::Mat::Random(3, 3), ad::Mat::Constant(3, 7, 1.0 / 7), ad::Mat::Constant(3, 5, 0.2)};
  GuidanceGrads g{ad::Mat::Ones(3, 3), ad::Mat::Ones(3, 7), ad::Mat::Ones(3, 5)};
  affinity::GuidanceConfig zero;
  zero.s = zero.r1 = zero.r2 = 0;
  affinity::GuidanceConfig off;
  off.enabled = false;
  diffusion::Rng a(7), b(7), c(7);
  const auto base = reverse_step(st, ReverseCoefs::at(s, 5), pred, nullptr, off, a);
  const auto z = reverse_step(st, ReverseCoefs::at(s, 5), pred, &g, zero, b);
  const auto d = reverse_step(st, ReverseCoefs::at(s, 5), pred, &g, off, c);
  EXPECT_EQ(base.x, z.x);
  EXPECT_EQ(base.v, z.v);
  EXPECT_EQ(base.b, z.b);
  EXPECT_EQ(base.x, d.x);
}

void expect_same(const std::vector<SampleRecord>& a, const std::vector<SampleRecord>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].seed, b[i].seed);
    EXPECT_EQ(a[i].molecule, b[i].molecule);
    EXPECT_EQ(a[i].predicted_affinity, b[i].predicted_affinity);
  }
}

TEST(Generate, SeededRunsAreIdenticalAcrossThreadCounts) {
  const Bench u = make_setup();
  auto c1 = run_config(4, true), c2 = c1;
  c2.threads = 2;
  const auto a = generate(u.params, u.s, u.c.pocket, u.part, c1);
  const auto b = generate(u.params, u.s, u.c.pocket, u.part, c1);
  const auto t = generate(u.params, u.s, u.c.pocket, u.part, c2);
  expect_same(a, b);
  expect_same(a, t);
}

TEST(Generate, ZeroScaleGuidanceIsTheBaseline) {
  const Bench u = make_setup(2);
  auto zero = run_config(3, true);
  zero.guidance.s = zero.guidance.r1 = zero.guidance.r2 = 0;
  expect_same(generate(u.params, u.s, u.c.pocket, u.part, zero),
              generate(u.params, u.s, u.c.pocket, u.part, run_config(3, false)));
}

TEST(Generate, GuidanceChangesOutput) {
  const Bench u = make_setup(3);
  auto g = run_config(3, true);
  g.guidance.s = 50;
  g.guidance.r1 = g.guidance.r2 = 5;
  const auto a = generate(u.params, u.s, u.c.pocket, u.part, g);
  const auto b = generate(u.params, u.s, u.c.pocket, u.part, run_config(3, false));
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a[i].predicted_affinity != b[i].predicted_affinity;
  EXPECT_TRUE(differs);
  EXPECT_TRUE(a[0].guided);
  EXPECT_FALSE(b[0].guided);
}

TEST(Generate, ContextIsBitUnchanged) {
  const Bench u = make_setup(4);
  const auto recs = generate(u.params, u.s, u.c.pocket, u.part, run_config(5, true));
  const auto retained = u.part.retained_indices();
  for (const auto& r : recs) {
    ASSERT_TRUE(r.molecule.has_value());
    const auto& m = *r.molecule;
    std::vector<int> pos(static_cast<std::size_t>(u.c.ligand.size() + 16), -1);
    for (std::size_t j = 0; j < r.kept.size(); ++j) pos[static_cast<std::size_t>(r.kept[j])] = static_cast<int>(j);
    for (int a : retained) {
      const int j = pos[static_cast<std::size_t>(a)];
      ASSERT_GE(j, 0);
      EXPECT_EQ(m.x.row(j), u.c.ligand.x.row(a));
      EXPECT_EQ(m.atom_type[static_cast<std::size_t>(j)], u.c.ligand.atom_type[static_cast<std::size_t>(a)]);
      for (int b : retained) {
        EXPECT_EQ(m.bond_type(j, pos[static_cast<std::size_t>(b)]), u.c.ligand.bond_type(a, b));
      }
    }
    EXPECT_GE(r.n_mask, u.part.n_mask() + 1);
  }
}

TEST(Generate, ZeroSamplesRejected) {
  const Bench u = make_setup();
  EXPECT_THROW(generate(u.params, u.s, u.c.pocket, u.part, run_config(0, false)), ValidationError);
}

TEST(StripFake, DropsFakeRowsAndColumns) {
  chem::Molecule3D m(3);
  m.atom_type = {0, kVocab.fake(), 1};
  m.x << 0, 0, 0, 1, 1, 1, 2, 2, 2;
  m.set_bond(0, 1, chem::Bond::kSingle);
  m.set_bond(1, 2, chem::Bond::kDouble);
  m.set_bond(0, 2, chem::Bond::kAromatic);
  std::vector<int> kept;
  const auto out = strip_fake(m, kVocab, &kept);
  ASSERT_EQ(out.size(), 2);
  EXPECT_EQ(kept, (std::vector<int>{0, 2}));
  EXPECT_EQ(out.bond(0, 1), chem::Bond::kAromatic);
  EXPECT_EQ(out.x.row(1), m.x.row(2));

  chem::Molecule3D clean = out;
  EXPECT_EQ(strip_fake(clean, kVocab), clean);
  chem::Molecule3D all(2);
  all.atom_type = {kVocab.fake(), kVocab.fake()};
  all.x.setZero();
  EXPECT_EQ(strip_fake(all, kVocab).size(), 0);
}

TEST(Hop, StepBoundsChecked) {
  const Bench u = make_setup();
  EXPECT_THROW(scaffold_hop(u.params, u.s, u.c.pocket, u.c.ligand, u.c.mask_indices, 0, run_config(1, false)),
               ValidationError);
  EXPECT_THROW(scaffold_hop(u.params, u.s, u.c.pocket, u.c.ligand, u.c.mask_indices, 9, run_config(1, false)),
               ValidationError);
}

TEST(Hop, SingleStepStaysClose) {
  Bench u = make_setup(5);
  u.s = NoiseSchedule::polynomial(100, 2.0);
  u.params = egnn::ModelParams::init(testing::tiny_config(), kVocab, 5);
  const auto recs = scaffold_hop(u.params, u.s, u.c.pocket, u.c.ligand, u.c.mask_indices, 1, run_config(10, false));
  for (const auto& r : recs) {
    ASSERT_TRUE(r.fragment_rmsd.has_value());
    EXPECT_LT(*r.fragment_rmsd, 0.5);
  }
}

TEST(Hop, NonFragmentAtomsUnchanged) {
  const Bench u = make_setup(6);
  const auto recs = scaffold_hop(u.params, u.s, u.c.pocket, u.c.ligand, u.c.mask_indices, 4, run_config(4, true));
  std::vector<bool> frag(static_cast<std::size_t>(u.c.ligand.size()), false);
  for (int a : u.c.mask_indices) frag[static_cast<std::size_t>(a)] = true;
  for (const auto& r : recs) {
    EXPECT_EQ(r.n_mask, static_cast<int>(u.c.mask_indices.size()));
    if (!r.molecule) continue;
    for (std::size_t j = 0; j < r.kept.size(); ++j) {
      const int a = r.kept[j];
      if (frag[static_cast<std::size_t>(a)]) continue;
      EXPECT_EQ(r.molecule->x.row(static_cast<Eigen::Index>(j)), u.c.ligand.x.row(a));
    }
  }
}

TEST(Output, ManifestHasOneRowPerSample) {
  const Bench u = make_setup(7);
  auto recs = generate(u.params, u.s, u.c.pocket, u.part, run_config(6, false));
  const auto dir = std::filesystem::temp_directory_path() / "leop_sampler_test";
  std::filesystem::remove_all(dir);
  write_run(dir, recs, kVocab, {{"task", "test"}});
  std::ifstream in(dir / "manifest.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j["samples"].size(), 6u);
  EXPECT_EQ(j["task"], "test");
  int files = 0;
  for (const auto& row : j["samples"]) {
    if (row["ligand_file"].is_null()) continue;
    EXPECT_TRUE(std::filesystem::exists(dir / row["ligand_file"].get<std::string>()));
    ++files;
  }
  EXPECT_EQ(files, j["n_emitted"].get<int>());
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace leop::sampler
