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

// Forward noising kernels and exact posteriors. Coordinates are Gaussian;
// atom and bond categories are categorical with a uniform noise component.
// Every function works on mask rows only; pocket and retained entries never
// reach this module.

#include <Eigen/Core>

#include <random>

#include "leop/autodiff.hpp"
#include "leop/schedule.hpp"

namespace leop::diffusion {

using Mat = ad::Mat;
using Rng = std::mt19937_64;

/// Mask-only diffusion state at step t.
struct NoisedState {
  Mat x;  // m x 3
  Mat v;  // m x K_v rows on the simplex
  Mat b;  // P x K_b rows on the simplex, one per diffused unordered pair
  int t = 0;
};

/// Throws ValidationError if any row is off the simplex by more than tol.
void check_simplex(const Mat& rows, double tol = 1e-6);

// ---------------------------------------------------------------- coordinates

/// Sample of N(sqrt(alpha_step) x_prev, sigma_step I).
Mat q_step_coords(const Mat& x_prev, const NoiseSchedule& s, int t, Rng& rng);
/// Sample of N(sqrt(alpha) x0, sigma I).
Mat q_marginal_coords(const Mat& x0, const NoiseSchedule& s, int t, Rng& rng);

struct GaussianPosterior {
  Mat mean;
  double variance = 0;
};

GaussianPosterior q_posterior_coords(const Mat& xt, const Mat& x0_hat, const NoiseSchedule& s, int t);

// ---------------------------------------------------------------- categories

/// keep * p + (1 - keep) / K for every row.
Mat categorical_mix(const Mat& p, double keep);

Mat q_step_categorical(const Mat& p_prev, const NoiseSchedule& s, int t);
Mat q_marginal_categorical(const Mat& p0, const NoiseSchedule& s, int t);

/// normalize((keep_step * p_t + (1 - keep_step) / K) .* mix(p0, keep_prev)).
/// Rows whose normalizer falls below 1e-30 are reported through `degenerate`
/// (if given) and left as zeros; without `degenerate` they throw NumericError.
Mat categorical_posterior(const Mat& p_t, const Mat& p0, double keep_step, double keep_prev,
                          std::vector<int>* degenerate = nullptr);

Mat q_posterior_categorical(const Mat& p_t, const Mat& p0, const NoiseSchedule& s, int t,
                            std::vector<int>* degenerate = nullptr);

/// Differentiable posterior with respect to p0 (the predicted clean rows);
/// p_t is a constant.
ad::Var categorical_posterior(ad::Tape& tape, const Mat& p_t, ad::Var p0, double keep_step, double keep_prev);

Mat sample_onehot(const Mat& probs, Rng& rng);
Mat argmax_onehot(const Mat& probs);
Mat onehot(const std::vector<int>& categories, int k);
std::vector<int> argmax_rows(const Mat& probs);

}  // namespace leop::diffusion
