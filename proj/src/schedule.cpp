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

#include "leop/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "leop/error.hpp"

namespace leop {

namespace {
constexpr double kClipLo = 1e-4;
constexpr double kClipHi = 1.0 - 1e-4;
}  // namespace

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kPolynomial: return "polynomial";
  }
  return "unknown";
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "polynomial") return ScheduleKind::kPolynomial;
  throw ValidationError("unknown schedule kind '" + name + "'");
}

NoiseSchedule NoiseSchedule::polynomial(int T, double power) {
  if (T < 2) throw ValidationError("schedule: T must be at least 2, got " + std::to_string(T));
  if (!(power > 0) || !std::isfinite(power)) throw ValidationError("schedule: power must be positive");
  std::vector<double> a(static_cast<std::size_t>(T) + 1);
  for (int t = 0; t <= T; ++t) {
    const double r = 1.0 - std::pow(static_cast<double>(t) / T, power);
    a[static_cast<std::size_t>(t)] = std::clamp(r * r, kClipLo, kClipHi);
  }
  // Interpolate across the plateaus left by the clip.
  int top = 0;
  while (top + 1 <= T && a[static_cast<std::size_t>(top) + 1] >= kClipHi) ++top;
  if (top > 0) {
    const int next = top + 1;  // first unclipped index (T itself if everything clipped)
    const double hi = a[0];
    const double lo = next <= T ? a[static_cast<std::size_t>(next)] : kClipLo;
    for (int t = 1; t < next && t <= T; ++t) a[static_cast<std::size_t>(t)] = hi + (lo - hi) * t / next;
  }
  int bottom = T;
  while (bottom - 1 >= 0 && a[static_cast<std::size_t>(bottom) - 1] <= kClipLo) --bottom;
  if (bottom < T) {
    const int prev = bottom - 1;
    const double hi = a[static_cast<std::size_t>(prev)];
    const double lo = a[static_cast<std::size_t>(T)];
    for (int t = bottom; t < T; ++t) {
      a[static_cast<std::size_t>(t)] = hi + (lo - hi) * (t - prev) / static_cast<double>(T - prev);
    }
  }
  NoiseSchedule s = from_alpha(std::move(a));
  s.power_ = power;
  return s;
}

NoiseSchedule NoiseSchedule::from_alpha(std::vector<double> alpha) {
  if (alpha.size() < 3) throw ValidationError("schedule: T must be at least 2");
  const std::size_t T = alpha.size() - 1;
  if (alpha[0] < 1.0 - 1e-4 || alpha[0] >= 1.0) throw ValidationError("schedule: alpha(0) must lie in [1-1e-4, 1)");
  if (alpha[T] > 1e-4 || alpha[T] <= 0.0) throw ValidationError("schedule: alpha(T) must lie in (0, 1e-4]");
  for (std::size_t t = 1; t <= T; ++t) {
    if (!(alpha[t] < alpha[t - 1])) {
      std::ostringstream os;
      os << "schedule: alpha must be strictly decreasing (t=" << t << ")";
      throw ValidationError(os.str());
    }
  }
  NoiseSchedule s;
  s.alpha_ = std::move(alpha);
  s.fill_derived();
  return s;
}

void NoiseSchedule::fill_derived() {
  const std::size_t n = alpha_.size();
  sigma_.resize(n);
  alpha_step_.assign(n, 1.0);
  sigma_step_.assign(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) sigma_[t] = 1.0 - alpha_[t];
  for (std::size_t t = 1; t < n; ++t) {
    alpha_step_[t] = alpha_[t] / alpha_[t - 1];
    sigma_step_[t] = sigma_[t] - alpha_step_[t] * sigma_[t - 1];
  }
}

void NoiseSchedule::check_t(int t, int lo) const {
  if (t < lo || t > steps()) {
    throw ValidationError("schedule: step " + std::to_string(t) + " outside [" + std::to_string(lo) + ", " +
                          std::to_string(steps()) + "]");
  }
}

double NoiseSchedule::alpha(int t) const {
  check_t(t, 0);
  return alpha_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::sigma(int t) const {
  check_t(t, 0);
  return sigma_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::alpha_step(int t) const {
  check_t(t, 1);
  return alpha_step_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::sigma_step(int t) const {
  check_t(t, 1);
  return sigma_step_[static_cast<std::size_t>(t)];
}

double snr(const NoiseSchedule& s, int t) { return s.alpha(t) / s.sigma(t); }

StepParams step_params(const NoiseSchedule& s, int t) {
  if (t < 1) throw ValidationError("step_params: t must be >= 1 (t=0 has no predecessor)");
  StepParams p{};
  p.alpha_step = s.alpha_step(t);
  p.sigma_step = s.sigma_step(t);
  const double sig_prev = s.sigma(t - 1);
  const double sig = s.sigma(t);
  p.beta_tilde = p.sigma_step * sig_prev / sig;
  p.coef_xt = std::sqrt(p.alpha_step) * sig_prev / sig;
  p.coef_x0 = std::sqrt(s.alpha(t - 1)) * p.sigma_step / sig;
  return p;
}

}  // namespace leop
