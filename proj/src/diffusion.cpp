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

#include "leop/diffusion.hpp"

#include <cmath>

#include "leop/error.hpp"

namespace leop::diffusion {

void check_simplex(const Mat& rows, double tol) {
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    if ((rows.row(r).array() < -tol).any() || std::abs(rows.row(r).sum() - 1.0) > tol) {
      throw ValidationError("categorical row " + std::to_string(r) + " is off the simplex");
    }
  }
}

namespace {

Mat gaussian(const Mat& mean, double variance, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat out = mean;
  const double sd = std::sqrt(variance);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double z = n(rng);
    if (variance > 0) out.data()[i] += sd * z;
  }
  return out;
}

}  // namespace

Mat q_step_coords(const Mat& x_prev, const NoiseSchedule& s, int t, Rng& rng) {
  return gaussian(std::sqrt(s.alpha_step(t)) * x_prev, s.sigma_step(t), rng);
}

Mat q_marginal_coords(const Mat& x0, const NoiseSchedule& s, int t, Rng& rng) {
  return gaussian(std::sqrt(s.alpha(t)) * x0, s.sigma(t), rng);
}

GaussianPosterior q_posterior_coords(const Mat& xt, const Mat& x0_hat, const NoiseSchedule& s, int t) {
  const StepParams p = step_params(s, t);
  return {p.coef_xt * xt + p.coef_x0 * x0_hat, p.beta_tilde};
}

Mat categorical_mix(const Mat& p, double keep) {
  const double k = static_cast<double>(p.cols());
  return (keep * p.array() + (1.0 - keep) / k).matrix();
}

Mat q_step_categorical(const Mat& p_prev, const NoiseSchedule& s, int t) {
  check_simplex(p_prev);
  return categorical_mix(p_prev, std::sqrt(s.alpha_step(t)));
}

Mat q_marginal_categorical(const Mat& p0, const NoiseSchedule& s, int t) {
  check_simplex(p0);
  return categorical_mix(p0, std::sqrt(s.alpha(t)));
}

Mat categorical_posterior(const Mat& p_t, const Mat& p0, double keep_step, double keep_prev,
                          std::vector<int>* degenerate) {
  Mat u = categorical_mix(p_t, keep_step).cwiseProduct(categorical_mix(p0, keep_prev));
  for (Eigen::Index r = 0; r < u.rows(); ++r) {
    const double z = u.row(r).sum();
    if (!(z >= 1e-30) || !std::isfinite(z)) {
      if (!degenerate) throw NumericError("degenerate categorical posterior at row " + std::to_string(r));
      degenerate->push_back(static_cast<int>(r));
      u.row(r).setZero();
      continue;
    }
    u.row(r) /= z;
  }
  return u;
}

Mat q_posterior_categorical(const Mat& p_t, const Mat& p0, const NoiseSchedule& s, int t,
                            std::vector<int>* degenerate) {
  if (t < 1) throw ValidationError("categorical posterior needs t >= 1");
  check_simplex(p_t);
  check_simplex(p0);
  return categorical_posterior(p_t, p0, std::sqrt(s.alpha_step(t)), std::sqrt(s.alpha(t - 1)), degenerate);
}

ad::Var categorical_posterior(ad::Tape& tape, const Mat& p_t, ad::Var p0, double keep_step, double keep_prev) {
  const double k = static_cast<double>(p_t.cols());
  ad::Var like = tape.constant(categorical_mix(p_t, keep_step));
  ad::Var prior = tape.affine(p0, keep_prev, (1.0 - keep_prev) / k);
  ad::Var u = tape.mul(like, prior);
  return tape.mul_col(u, tape.reciprocal(tape.row_sum(u)));
}

Mat sample_onehot(const Mat& probs, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Mat out = Mat::Zero(probs.rows(), probs.cols());
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const double u = u01(rng) * probs.row(r).sum();
    double acc = 0.0;
    Eigen::Index pick = probs.cols() - 1;
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      acc += probs(r, c);
      if (u < acc) {
        pick = c;
        break;
      }
    }
    out(r, pick) = 1.0;
  }
  return out;
}

std::vector<int> argmax_rows(const Mat& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index c = 0;
    probs.row(r).maxCoeff(&c);
    out[static_cast<std::size_t>(r)] = static_cast<int>(c);
  }
  return out;
}

Mat argmax_onehot(const Mat& probs) { return onehot(argmax_rows(probs), static_cast<int>(probs.cols())); }

Mat onehot(const std::vector<int>& categories, int k) {
  Mat out = Mat::Zero(static_cast<Eigen::Index>(categories.size()), k);
  for (std::size_t r = 0; r < categories.size(); ++r) out(static_cast<Eigen::Index>(r), categories[r]) = 1.0;
  return out;
}

}  // namespace leop::diffusion
