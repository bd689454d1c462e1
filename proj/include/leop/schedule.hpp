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

#include <string>
#include <vector>

namespace leop {

enum class ScheduleKind { kPolynomial };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

/// Variance-preserving noise schedule. alpha(t) is the signal variance
/// fraction and sigma(t) = 1 - alpha(t) the noise variance, for t = 0..T.
/// Immutable after construction.
class NoiseSchedule {
 public:
  /// alpha(t) = clip((1 - (t/T)^power)^2, 1e-4, 1 - 1e-4); plateaus created by
  /// the clip are replaced by linear interpolation so alpha stays strictly
  /// decreasing.
  static NoiseSchedule polynomial(int T, double power);

  /// Validates every schedule invariant on a caller-supplied alpha array.
  static NoiseSchedule from_alpha(std::vector<double> alpha);

  int steps() const { return static_cast<int>(alpha_.size()) - 1; }
  ScheduleKind kind() const { return kind_; }
  double power() const { return power_; }

  double alpha(int t) const;
  double sigma(int t) const;
  /// alpha(t) / alpha(t-1); defined for t >= 1.
  double alpha_step(int t) const;
  /// sigma(t) - alpha_step(t) * sigma(t-1); defined for t >= 1.
  double sigma_step(int t) const;

  const std::vector<double>& alphas() const { return alpha_; }

 private:
  NoiseSchedule() = default;
  void fill_derived();
  void check_t(int t, int lo) const;

  ScheduleKind kind_ = ScheduleKind::kPolynomial;
  double power_ = 0;
  std::vector<double> alpha_, sigma_, alpha_step_, sigma_step_;
};

double snr(const NoiseSchedule& s, int t);

/// Construction parameters, as stored in weights files and run configs.
struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::kPolynomial;
  int T = 500;
  double power = 2.0;

  NoiseSchedule build() const { return NoiseSchedule::polynomial(T, power); }
  bool operator==(const ScheduleSpec&) const = default;
};

/// Per-step coefficients of the Gaussian reverse transition.
struct StepParams {
  double alpha_step;  // alpha(t)/alpha(t-1)
  double sigma_step;
  double beta_tilde;  // sigma_step * sigma(t-1) / sigma(t)
  double coef_xt;     // sqrt(alpha_step) * sigma(t-1) / sigma(t)
  double coef_x0;     // sqrt(alpha(t-1)) * sigma_step / sigma(t)
};

StepParams step_params(const NoiseSchedule& s, int t);

}  // namespace leop
