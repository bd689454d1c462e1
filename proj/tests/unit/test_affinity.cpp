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
#include <limits>
#include <numeric>

#include "../test_util.hpp"
#include "leop/affinity.hpp"
#include "leop/error.hpp"

namespace leop::affinity {
namespace {

using diffusion::Mat;
using diffusion::NoisedState;

const auto kVocab = chem::AtomVocab::standard();

struct Fixture {
  egnn::ModelParams params;
  Complex cx;
  NoisedState st;
  int T = 40;
};

Fixture make_fixture(int n_pocket, int n_ligand, int n_mask, std::uint64_t seed) {
  Fixture f;
  const auto mc = testing::random_complex(n_pocket, n_ligand, n_mask, seed);
  f.params = egnn::ModelParams::init(testing::tiny_config(), kVocab, seed);
  testing::randomize(f.params, seed + 1);
  f.cx = make_complex(mc.pocket, mc.part);
  diffusion::Rng rng(seed + 2);
  f.st = noised_from_clean(f.cx, f.params.config.atom_types, NoiseSchedule::polynomial(f.T, 2.0), 11, rng);
  return f;
}

void zero_final_layer(egnn::ModelParams& p) {
  p.affinity.at(p.affinity_head.w2).setZero();
  p.affinity.at(p.affinity_head.b2).setZero();
}

TEST(Head, ZeroFinalLayerPredictsHalf) {
  auto f = make_fixture(5, 5, 2, 1);
  zero_final_layer(f.params);
  EXPECT_DOUBLE_EQ(predict_affinity(f.params, f.cx, f.st, f.T), 0.5);
}

TEST(Head, OutputLiesInUnitInterval) {
  for (std::uint64_t seed = 2; seed < 12; ++seed) {
    auto f = make_fixture(6, 5, 3, seed);
    for (int i = 0; i < f.params.affinity.size(); ++i) f.params.affinity.at(i) *= 10.0;
    const double a = predict_affinity(f.params, f.cx, f.st, f.T);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
}

TEST(Head, PocketOrderDoesNotMatter) {
  auto f = make_fixture(7, 5, 2, 3);
  const double ref = predict_affinity(f.params, f.cx, f.st, f.T);
  Complex moved = f.cx;
  const int n = moved.pocket.size();
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  for (int i = 0; i < n; ++i) {
    moved.pocket.x.row(i) = f.cx.pocket.x.row(perm[static_cast<std::size_t>(i)]);
    moved.pocket.atom_type[static_cast<std::size_t>(i)] = f.cx.pocket.atom_type[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
  }
  EXPECT_NEAR(predict_affinity(f.params, moved, f.st, f.T), ref, 1e-12);
}

TEST(Head, LigandOrderDoesNotMatter) {
  const auto mc = testing::random_complex(6, 6, 3, 12);
  auto params = egnn::ModelParams::init(testing::tiny_config(), kVocab, 12);
  testing::randomize(params, 13);
  const std::vector<int> perm = {4, 0, 5, 2, 1, 3};
  const auto& lig = mc.part.ligand;
  chem::LigandPartition moved{chem::Molecule3D(lig.size()), std::vector<bool>(lig.size())};
  for (int i = 0; i < lig.size(); ++i) {
    const int from = perm[static_cast<std::size_t>(i)];
    moved.ligand.x.row(i) = lig.x.row(from);
    moved.ligand.atom_type[static_cast<std::size_t>(i)] = lig.atom_type[static_cast<std::size_t>(from)];
    moved.mask[static_cast<std::size_t>(i)] = mc.part.mask[static_cast<std::size_t>(from)];
    for (int j = 0; j < lig.size(); ++j) {
      if (i != j) moved.ligand.set_bond(i, j, lig.bond(from, perm[static_cast<std::size_t>(j)]));
    }
  }
  auto value = [&](const chem::LigandPartition& part) {
    const Complex cx = make_complex(mc.pocket, part);
    NoisedState st = clean_state(cx, params.config.atom_types);
    st.t = 9;
    return predict_affinity(params, cx, st, 20);
  };
  EXPECT_NEAR(value(moved), value(mc.part), 1e-12);
}

TEST(Head, GradientsMatchDifferences) {
  auto f = make_fixture(3, 4, 2, 4);
  const AffinityGradients g = grad_affinity_inputs(f.params, f.cx, f.st, f.T);
  ASSERT_EQ(g.grads.x.rows(), f.cx.n_mask());
  auto value = [&] { return predict_affinity(f.params, f.cx, f.st, f.T); };
  int bad = 0, checked = 0;
  auto check = [&](double& slot, double ana, const std::string& what) {
    const double num = testing::central_difference(slot, 1e-5, value);
    ++checked;
    if (!testing::close_rel(ana, num, 1e-4, 1e-8)) {
      ++bad;
      ADD_FAILURE() << what << ": " << ana << " vs " << num;
    }
  };
  for (int i = 0; i < f.params.affinity.size(); ++i) {
    Mat& w = f.params.affinity.at(i);
    for (Eigen::Index k = 0; k < w.size(); ++k) check(w.data()[k], g.grads.affinity[static_cast<std::size_t>(i)].data()[k], f.params.affinity.name(i));
  }
  for (int i = 0; i < f.params.denoiser.size(); ++i) {
    Mat& w = f.params.denoiser.at(i);
    for (Eigen::Index k = 0; k < w.size(); ++k) check(w.data()[k], g.grads.denoiser[static_cast<std::size_t>(i)].data()[k], f.params.denoiser.name(i));
  }
  for (Eigen::Index k = 0; k < f.st.x.size(); ++k) check(f.st.x.data()[k], g.grads.x.data()[k], "x");
  for (Eigen::Index k = 0; k < f.st.v.size(); ++k) check(f.st.v.data()[k], g.grads.v.data()[k], "v");
  for (Eigen::Index k = 0; k < f.st.b.size(); ++k) check(f.st.b.data()[k], g.grads.b.data()[k], "b");
  EXPECT_GT(checked, 500);
  EXPECT_EQ(bad, 0);
}

TEST(Head, ZeroFinalLayerHasNoInputGradient) {
  auto f = make_fixture(5, 5, 3, 5);
  zero_final_layer(f.params);
  const AffinityGradients g = grad_affinity_inputs(f.params, f.cx, f.st, f.T);
  EXPECT_LE(g.grads.x.cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE(g.grads.v.cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE(g.grads.b.cwiseAbs().maxCoeff(), 1e-14);
  for (const Mat& m : g.grads.denoiser) EXPECT_LE(m.cwiseAbs().maxCoeff(), 1e-14);
}

std::vector<chem::MaskedComplex> toy_data(int n, std::uint64_t seed) {
  chem::ToyDatasetSpec spec;
  spec.n_complexes = n;
  spec.random_seed = seed;
  std::vector<chem::MaskedComplex> out;
  for (const auto& c : chem::gen_toy_dataset(spec, kVocab)) {
    out.push_back({c.pocket, chem::partition_retain_mask(c.ligand, c.mask_indices)});
  }
  return out;
}

WeightsFile fresh(std::uint64_t seed) {
  WeightsFile w;
  w.params = egnn::ModelParams::init(testing::tiny_config(), kVocab, seed);
  w.schedule = {ScheduleKind::kPolynomial, 20, 2.0};
  return w;
}

AffinityTrainConfig quick(int epochs) {
  AffinityTrainConfig c;
  c.epochs = epochs;
  c.batch_size = 4;
  c.learning_rate = 1e-2;
  c.threads = 1;
  c.seed = 9;
  c.validation_fraction = 0.25;
  return c;
}

TEST(Train, ConstantLabelIsLearned) {
  const auto data = toy_data(16, 2);
  const std::vector<double> y(data.size(), 0.3);
  WeightsFile w = fresh(1);
  const auto before = w.params.denoiser;
  const AffinityTrace tr = train_affinity(w, data, y, quick(100));
  ASSERT_EQ(tr.val_rmse.size(), 100u);
  EXPECT_LT(tr.val_rmse.back(), 0.02);
  for (int i = 0; i < before.size(); ++i) EXPECT_EQ(w.params.denoiser.at(i), before.at(i));
  EXPECT_EQ(w.affinity_epoch, 100);
}

TEST(Train, SameSeedSameTrace) {
  const auto data = toy_data(8, 3);
  std::vector<double> y;
  for (std::size_t i = 0; i < data.size(); ++i) y.push_back(0.1 * static_cast<double>(i % 5));
  WeightsFile a = fresh(2), b = fresh(2);
  auto ca = quick(3), cb = quick(3);
  cb.threads = 2;
  const auto ta = train_affinity(a, data, y, ca);
  const auto tb = train_affinity(b, data, y, cb);
  EXPECT_EQ(ta.train_mse, tb.train_mse);
  for (int i = 0; i < a.params.affinity.size(); ++i) EXPECT_EQ(a.params.affinity.at(i), b.params.affinity.at(i));
}

TEST(Train, RejectsBadInput) {
  const auto data = toy_data(4, 4);
  WeightsFile w = fresh(3);
  EXPECT_THROW(train_affinity(w, data, {0.1, 0.2}, quick(1)), ValidationError);
  auto c = quick(1);
  c.validation_fraction = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = quick(1);
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Guidance, CategoricalHandValue) {
  Mat p(1, 2), g(1, 2);
  p << 0.8, 0.2;
  g << 1.0, 0.0;
  const Mat q = guide_categorical(p, g, std::log(2.0), 0.0);
  EXPECT_NEAR(q(0, 0), 8.0 / 9.0, 1e-15);
  EXPECT_NEAR(q(0, 1), 1.0 / 9.0, 1e-15);
}

TEST(Guidance, ZeroGradientOnlySmooths) {
  Mat p(2, 3), g = Mat::Zero(2, 3);
  p << 0.5, 0.5, 0.0, 1.0, 0.0, 0.0;
  const double d = 0.01;
  const Mat q = guide_categorical(p, g, 3.0, d);
  for (Eigen::Index i = 0; i < 2; ++i) {
    for (Eigen::Index c = 0; c < 3; ++c) EXPECT_NEAR(q(i, c), (p(i, c) + d) / (1.0 + 3 * d), 1e-15);
  }
}

TEST(Guidance, LargerGradientRaisesProbability) {
  Mat p(1, 3), g = Mat::Zero(1, 3);
  p << 0.3, 0.3, 0.4;
  double prev = 0;
  for (double s : {-1.0, 0.0, 0.5, 2.0}) {
    g(0, 0) = s;
    const double now = guide_categorical(p, g, 1.0, 0.01)(0, 0);
    EXPECT_GT(now, prev);
    prev = now;
  }
}

TEST(Guidance, ExtremeExponentsAreClampedAndCounted) {
  Mat p(1, 2), g(1, 2);
  p << 0.5, 0.5;
  g << 1e6, std::numeric_limits<double>::quiet_NaN();
  int warnings = 0;
  const Mat q = guide_categorical(p, g, 1.0, 0.01, &warnings);
  EXPECT_EQ(warnings, 2);
  EXPECT_TRUE(q.allFinite());
  EXPECT_NEAR(q.sum(), 1.0, 1e-12);
}

TEST(Guidance, CoordinateShiftIsScaleTimesVariance) {
  const Mat mu = Mat::Zero(4, 3);
  Mat grad = Mat::Zero(4, 3);
  grad.col(2).setOnes();
  const double beta = 0.01, s = 10.0;
  diffusion::Rng rng(5);
  const int n = 20000;
  Eigen::RowVector3d mean = Eigen::RowVector3d::Zero();
  for (int i = 0; i < n; ++i) mean += guide_coords(mu, beta, &grad, s, rng).colwise().mean();
  mean /= n;
  const double se = std::sqrt(beta / (4.0 * n));
  EXPECT_NEAR(mean(2), s * beta, 4 * se);
  EXPECT_NEAR(mean(0), 0.0, 4 * se);
}

TEST(Guidance, ZeroVarianceIsDeterministic) {
  Mat mu(2, 3);
  mu << 1, 2, 3, 4, 5, 6;
  const Mat grad = Mat::Ones(2, 3);
  diffusion::Rng rng(1);
  EXPECT_EQ(guide_coords(mu, 0.0, &grad, 5.0, rng), mu);
  EXPECT_EQ(guide_coords(mu, 0.0, nullptr, 5.0, rng), mu);
  const Mat bad = Mat::Ones(1, 3);
  EXPECT_THROW(guide_coords(mu, 0.1, &bad, 1.0, rng), ValidationError);
}

TEST(Guidance, ConfigValidation) {
  GuidanceConfig c;
  EXPECT_NO_THROW(c.validate());
  c.delta = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.s = std::numeric_limits<double>::infinity();
  EXPECT_THROW(c.validate(), ValidationError);
}

}  // namespace
}  // namespace leop::affinity
