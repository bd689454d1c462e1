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

#include "../test_util.hpp"
#include "leop/affinity.hpp"
#include "leop/egnn.hpp"
#include "leop/error.hpp"

namespace leop::egnn {
namespace {

using diffusion::NoisedState;

struct Fixture {
  ModelParams params;
  Complex cx;
  NoisedState st;
  int T = 50;
};

Fixture make_fixture(int n_pocket, int n_ligand, int n_mask, std::uint64_t seed, bool random_params = true) {
  Fixture f;
  const auto mc = testing::random_complex(n_pocket, n_ligand, n_mask, seed);
  f.params = ModelParams::init(testing::tiny_config(), chem::AtomVocab::standard(), seed);
  if (random_params) testing::randomize(f.params, seed + 1);
  f.cx = make_complex(mc.pocket, mc.part);
  const auto s = NoiseSchedule::polynomial(f.T, 2.0);
  diffusion::Rng rng(seed + 2);
  f.st = affinity::noised_from_clean(f.cx, f.params.config.atom_types, s, 17, rng);
  return f;
}

TEST(Graph, CollinearNearestNeighbour) {
  Mat x = Mat::Zero(3, 3);
  x(1, 0) = 1.0;
  x(2, 0) = 3.0;
  const auto g = build_complex_graph(x, 3, 1);
  ASSERT_EQ(g.knn_dst.size(), 3u);
  for (std::size_t e = 0; e < 3; ++e) {
    const int expected[] = {1, 0, 1};
    EXPECT_EQ(g.knn_src[e], expected[g.knn_dst[e]]);
  }
}

TEST(Graph, SaturatedKnnIsComplete) {
  std::mt19937_64 rng(4);
  const Mat x = testing::random_coords(6, 2.0, rng);
  const auto g = build_complex_graph(x, 4, 10);
  EXPECT_EQ(g.knn_src.size(), 30u);
  EXPECT_EQ(g.lig_src.size(), 2u);
  for (std::size_t e = 0; e < g.knn_src.size(); ++e) {
    const bool sp = g.knn_src[e] < 4, dp = g.knn_dst[e] < 4;
    const EdgeLabel want =
        sp && dp ? EdgeLabel::kProteinProtein : (!sp && !dp ? EdgeLabel::kLigandLigand : EdgeLabel::kProteinLigand);
    EXPECT_EQ(g.knn_label[e], want);
  }
}

TEST(Model, InitIsDeterministicAndBindsByName) {
  const auto a = ModelParams::init(testing::tiny_config(), chem::AtomVocab::standard(), 5);
  auto b = ModelParams::init(testing::tiny_config(), chem::AtomVocab::standard(), 5);
  ASSERT_EQ(a.denoiser.size(), b.denoiser.size());
  for (int i = 0; i < a.denoiser.size(); ++i) EXPECT_EQ(a.denoiser.at(i), b.denoiser.at(i));
  b.bind();
  EXPECT_EQ(a.atom_head.w2, b.atom_head.w2);
  EXPECT_EQ(a.layers.size(), b.layers.size());
}

TEST(Model, ZeroCoordinateLayersKeepCoordinates) {
  auto f = make_fixture(5, 4, 2, 1, false);
  Forward fw(f.params, f.cx, f.st, f.T, false);
  EXPECT_EQ(fw.tape().value(fw.x0_hat()), f.st.x);
  EXPECT_EQ(fw.tape().value(fw.v_hat()).rows(), 2);
  EXPECT_EQ(fw.tape().value(fw.b_hat()).rows(), f.cx.n_pairs());
}

TEST(Model, ContextCoordinatesUntouched) {
  auto f = make_fixture(5, 5, 2, 2);
  Forward fw(f.params, f.cx, f.st, f.T, false);
  const Mat& all = fw.tape().value(fw.coords());
  for (int i = 0; i < f.cx.pocket.size(); ++i) EXPECT_EQ(all.row(i), f.cx.pocket.x.row(i));
  for (int a : f.cx.retained_atoms) EXPECT_EQ(all.row(f.cx.pocket.size() + a), f.cx.ligand.x.row(a));
}

TEST(Model, RigidMotionEquivariance) {
  auto f = make_fixture(8, 6, 3, 3);
  Forward ref(f.params, f.cx, f.st, f.T, false);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int rep = 0; rep < 5; ++rep) {
    const Eigen::Matrix3d Q = testing::random_rotation(rng);
    const Eigen::RowVector3d tau(n(rng), n(rng), n(rng));
    Complex moved = f.cx;
    NoisedState st = f.st;
    auto apply = [&](auto& x) { x = ((x * Q.transpose()).rowwise() + tau).eval(); };
    apply(moved.pocket.x);
    apply(moved.ligand.x);
    apply(st.x);
    Forward fw(f.params, moved, st, f.T, false);
    const Mat want = (ref.tape().value(ref.x0_hat()) * Q.transpose()).rowwise() + tau;
    EXPECT_LE((fw.tape().value(fw.x0_hat()) - want).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((fw.tape().value(fw.v_hat()) - ref.tape().value(ref.v_hat())).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((fw.tape().value(fw.b_hat()) - ref.tape().value(ref.b_hat())).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((fw.tape().value(fw.h()) - ref.tape().value(ref.h())).cwiseAbs().maxCoeff(), 1e-9);
  }
}

Upstream random_upstream(const Forward& fw, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  auto fill = [&](const Mat& like) {
    Mat m(like.rows(), like.cols());
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
  };
  return {fill(fw.tape().value(fw.x0_hat())), fill(fw.tape().value(fw.v_hat())), fill(fw.tape().value(fw.b_hat()))};
}

double project(const ModelParams& p, const Complex& cx, const NoisedState& st, int T, const Upstream& up) {
  Forward fw(p, cx, st, T, false);
  const auto& t = fw.tape();
  return t.value(fw.x0_hat()).cwiseProduct(up.x0_hat).sum() + t.value(fw.v_hat()).cwiseProduct(up.v_hat).sum() +
         t.value(fw.b_hat()).cwiseProduct(up.b_hat).sum();
}

TEST(Model, ParameterAndInputGradientsMatchDifferences) {
  auto f = make_fixture(3, 3, 2, 4);
  Forward fw(f.params, f.cx, f.st, f.T, true);
  const Upstream up = random_upstream(fw, 6);
  const Gradients g = fw.backward(up);
  int checked = 0, bad = 0;
  for (int i = 0; i < f.params.denoiser.size(); ++i) {
    Mat& w = f.params.denoiser.at(i);
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      const double num = testing::central_difference(w.data()[k], 1e-5, [&] { return project(f.params, f.cx, f.st, f.T, up); });
      const double ana = g.denoiser[static_cast<std::size_t>(i)].data()[k];
      ++checked;
      if (!testing::close_rel(ana, num, 1e-4, 1e-7)) {
        ++bad;
        ADD_FAILURE() << f.params.denoiser.name(i) << "[" << k << "]: " << ana << " vs " << num;
      }
    }
  }
  EXPECT_GT(checked, 500);
  EXPECT_EQ(bad, 0);
  for (auto* pair : {&f.st.x, &f.st.v, &f.st.b}) {
    const Mat& grad = pair == &f.st.x ? g.x : (pair == &f.st.v ? g.v : g.b);
    for (Eigen::Index k = 0; k < pair->size(); ++k) {
      const double num = testing::central_difference(pair->data()[k], 1e-5, [&] { return project(f.params, f.cx, f.st, f.T, up); });
      EXPECT_TRUE(testing::close_rel(grad.data()[k], num, 1e-4, 1e-7)) << k << ": " << grad.data()[k] << " vs " << num;
    }
  }
}

TEST(Model, GradientsScaleLinearly) {
  auto f = make_fixture(4, 4, 2, 5);
  Forward a(f.params, f.cx, f.st, f.T, true);
  Upstream up = random_upstream(a, 1);
  const Gradients g1 = a.backward(up);
  Forward b(f.params, f.cx, f.st, f.T, true);
  up.x0_hat *= 2;
  up.v_hat *= 2;
  up.b_hat *= 2;
  const Gradients g2 = b.backward(up);
  for (std::size_t i = 0; i < g1.denoiser.size(); ++i) EXPECT_EQ(g2.denoiser[i], 2.0 * g1.denoiser[i]);
  EXPECT_EQ(g2.x, 2.0 * g1.x);
  EXPECT_EQ(g1.x.rows(), f.cx.n_mask());
}

TEST(Model, NonFiniteParameterNamesLayer) {
  auto f = make_fixture(4, 4, 2, 6);
  const int id = f.params.layers[1].node.w2;
  f.params.denoiser.at(id)(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    Forward fw(f.params, f.cx, f.st, f.T, false);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.layer(), 1);
  }
}

TEST(Model, BackwardWithoutRecordingRaises) {
  auto f = make_fixture(4, 4, 2, 7);
  Forward fw(f.params, f.cx, f.st, f.T, false);
  EXPECT_THROW(fw.backward_scalar(fw.tape().sum(fw.x0_hat())), UsageError);
}

TEST(Model, StateShapeChecked) {
  auto f = make_fixture(4, 4, 2, 8);
  f.st.v = Mat::Zero(1, f.params.config.atom_types);
  EXPECT_THROW(Forward(f.params, f.cx, f.st, f.T, false), ValidationError);
}

}  // namespace
}  // namespace leop::egnn
