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

// Affinity head on top of the denoiser's final node states, its regression
// training against the geometric oracle, and the guidance transforms.

#include <cstdint>
#include <functional>
#include <vector>

#include "leop/chem.hpp"
#include "leop/complex.hpp"
#include "leop/diffusion.hpp"
#include "leop/egnn.hpp"
#include "leop/weights.hpp"

namespace leop::affinity {

struct GuidanceConfig {
  double s = 1.0;
  double r1 = 0.5;
  double r2 = 0.5;
  double delta = 0.01;
  bool enabled = true;

  void validate() const;
  /// False when disabled or when s, r1 and r2 are all zero (no-op path).
  bool active() const { return enabled && (s != 0 || r1 != 0 || r2 != 0); }
};

/// Builds the predicted affinity on the forward tape: a weighted mean over
/// ligand atoms of logistic(head(h_i, t)), where retained atoms weigh 1 and
/// mask atoms weigh 1 - p(FAKE) under the current noised types.
ad::Var affinity_on_tape(egnn::Forward& f, const Complex& cx);

double predict_affinity(const egnn::ModelParams& params, const Complex& cx, const diffusion::NoisedState& st, int T);

struct AffinityGradients {
  double value = 0;
  egnn::Gradients grads;  // x, v, b are restricted to mask components
};

AffinityGradients grad_affinity_inputs(const egnn::ModelParams& params, const Complex& cx,
                                       const diffusion::NoisedState& st, int T);

struct AffinityTrainConfig {
  double learning_rate = 3e-3;
  int epochs = 30;
  int batch_size = 16;
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int threads = 0;
  PaddingPolicy padding;

  void validate() const;
};

struct AffinityTrace {
  std::vector<double> train_mse;
  std::vector<double> val_rmse;  // empty entries when there is no validation split
};

/// Regresses the head onto `targets` with the denoiser frozen. The last
/// validation_fraction of `data` is held out.
AffinityTrace train_affinity(WeightsFile& w, const std::vector<chem::MaskedComplex>& data,
                             const std::vector<double>& targets, const AffinityTrainConfig& cfg,
                             const std::function<void(int, double, double)>& on_epoch = {});

/// RMSE of the head on (data, targets) at steps drawn uniformly from [1, T].
double affinity_rmse(const egnn::ModelParams& params, const std::vector<chem::MaskedComplex>& data,
                     const std::vector<double>& targets, const NoiseSchedule& s, std::uint64_t seed, const PaddingPolicy& padding,
                     int threads = 0);

/// Draws (x^t, v^t, b^t) from the forward marginals of a clean complex.
diffusion::NoisedState noised_from_clean(const Complex& cx, int k_atoms, const NoiseSchedule& s, int t,
                                         diffusion::Rng& rng);

// ---------------------------------------------------------------- guidance

/// Sample of N(mu + s * beta * grad, beta I); grad may be null (no shift).
ad::Mat guide_coords(const ad::Mat& mu, double beta, const ad::Mat* grad, double s, diffusion::Rng& rng);

/// (p + delta) .* exp(r * grad), renormalized per row. Exponents outside
/// [-50, 50] or NaN are clamped and counted in `warnings`.
ad::Mat guide_categorical(const ad::Mat& p, const ad::Mat& grad, double r, double delta, int* warnings = nullptr);

}  // namespace leop::affinity
