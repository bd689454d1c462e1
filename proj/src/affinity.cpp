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

#include "leop/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "leop/error.hpp"
#include "leop/parallel.hpp"
#include "leop/rng.hpp"
#include "leop/training.hpp"

namespace leop::affinity {

using ad::Mat;
using ad::Var;
using diffusion::NoisedState;

void GuidanceConfig::validate() const {
  if (!std::isfinite(s) || !std::isfinite(r1) || !std::isfinite(r2)) {
    throw ValidationError("guidance: s, r1 and r2 must be finite");
  }
  if (!(delta > 0) || !std::isfinite(delta)) throw ValidationError("guidance: delta must be positive");
}

void AffinityTrainConfig::validate() const {
  auto bad = [](const std::string& what) { throw ValidationError("affinity train config: " + what); };
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) bad("learning_rate must be >= 0");
  if (epochs < 0) bad("epochs must be >= 0");
  if (batch_size < 1) bad("batch_size must be >= 1");
  if (!(validation_fraction >= 0 && validation_fraction < 1)) bad("validation_fraction must lie in [0, 1)");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) bad("beta1 and beta2 must lie in [0, 1)");
  if (!(eps > 0)) bad("eps must be positive");
  if (threads < 0) bad("threads must be >= 0");
  padding.validate();
}

namespace {

// Head evaluation shared by the sampling tape and the head-only training tape.
Var head_on_tape(ad::Tape& tp, const egnn::ModelParams& params, const std::vector<Var>& hp, Var h_lig, Var time,
                 Var weights) {
  const egnn::Mlp& a = params.affinity_head;
  auto P = [&](int id) { return hp[static_cast<std::size_t>(id)]; };
  Var pre = tp.add_row(tp.matmul(h_lig, P(a.w_in[0])), tp.add(P(a.b1), tp.matmul(time, P(a.w_time))));
  Var z = tp.add_row(tp.matmul(tp.silu(pre), P(a.w2)), P(a.b2));
  Var sig = tp.sigmoid(z);
  Var num = tp.sum(tp.mul(weights, sig));
  return tp.mul(num, tp.reciprocal(tp.sum(weights)));
}

std::vector<int> ligand_nodes(const Complex& cx, int n_pocket) {
  std::vector<int> idx(static_cast<std::size_t>(cx.n_ligand()));
  std::iota(idx.begin(), idx.end(), n_pocket);
  return idx;
}

Var atom_weights(ad::Tape& tp, const Complex& cx, Var v, int fake) {
  const int NL = cx.n_ligand();
  const int K = static_cast<int>(tp.value(v).cols());
  Mat base = Mat::Zero(NL, 1);
  for (int a : cx.retained_atoms) base(a, 0) = 1.0;
  Mat pick = Mat::Zero(K, 1);
  pick(fake, 0) = 1.0;
  Var real = tp.affine(tp.matmul(v, tp.constant(std::move(pick))), -1.0, 1.0);
  return tp.add(tp.constant(std::move(base)), tp.scatter_add_rows(real, cx.mask_atoms, NL));
}

struct HeadInputs {
  Mat h_lig, time, weights;
};

HeadInputs head_inputs(const egnn::ModelParams& params, const Complex& cx, const NoisedState& st, int T) {
  egnn::Forward f(params, cx, st, T, false);
  ad::Tape& tp = f.tape();
  HeadInputs in;
  in.h_lig = tp.value(tp.gather_rows(f.h(), ligand_nodes(cx, f.n_pocket())));
  in.time = tp.value(f.time());
  in.weights = tp.value(atom_weights(tp, cx, f.v_input(), params.vocab.fake()));
  return in;
}

}  // namespace

Var affinity_on_tape(egnn::Forward& f, const Complex& cx) {
  ad::Tape& tp = f.tape();
  const auto& hp = f.affinity_param_vars();
  const egnn::ModelParams& params = f.params();
  Var h_lig = tp.gather_rows(f.h(), ligand_nodes(cx, f.n_pocket()));
  Var w = atom_weights(tp, cx, f.v_input(), params.vocab.fake());
  return head_on_tape(tp, params, hp, h_lig, f.time(), w);
}

double predict_affinity(const egnn::ModelParams& params, const Complex& cx, const NoisedState& st, int T) {
  egnn::Forward f(params, cx, st, T, false);
  return f.tape().value(affinity_on_tape(f, cx))(0, 0);
}

AffinityGradients grad_affinity_inputs(const egnn::ModelParams& params, const Complex& cx, const NoisedState& st,
                                       int T) {
  egnn::Forward f(params, cx, st, T, true);
  Var a = affinity_on_tape(f, cx);
  AffinityGradients out;
  out.value = f.tape().value(a)(0, 0);
  out.grads = f.backward_scalar(a);
  return out;
}

NoisedState noised_from_clean(const Complex& cx, int k_atoms, const NoiseSchedule& s, int t, diffusion::Rng& rng) {
  const NoisedState clean = clean_state(cx, k_atoms);
  NoisedState st;
  st.t = t;
  st.x = diffusion::q_marginal_coords(clean.x, s, t, rng);
  st.v = diffusion::sample_onehot(diffusion::q_marginal_categorical(clean.v, s, t), rng);
  st.b = diffusion::sample_onehot(diffusion::q_marginal_categorical(clean.b, s, t), rng);
  return st;
}

double affinity_rmse(const egnn::ModelParams& params, const std::vector<chem::MaskedComplex>& data,
                     const std::vector<double>& targets, const NoiseSchedule& s, std::uint64_t seed, const PaddingPolicy& padding,
                     int threads) {
  if (data.size() != targets.size()) throw ValidationError("affinity: one target per complex required");
  if (data.empty()) throw ValidationError("affinity: empty evaluation set");
  const int T = s.steps();
  std::vector<double> err(data.size());
  parallel_for(static_cast<int>(data.size()), threads, [&](int i) {
    const auto k = static_cast<std::size_t>(i);
    diffusion::Rng r(derive_seed(seed, k));
    const Complex cx = prepare_complex(data[k].pocket, data[k].part, padding.draw(r), params.vocab);
    const int t = std::uniform_int_distribution<int>(1, T)(r);
    const NoisedState st = noised_from_clean(cx, params.config.atom_types, s, t, r);
    const double d = predict_affinity(params, cx, st, T) - targets[k];
    err[k] = d * d;
  });
  return std::sqrt(std::accumulate(err.begin(), err.end(), 0.0) / static_cast<double>(err.size()));
}

AffinityTrace train_affinity(WeightsFile& w, const std::vector<chem::MaskedComplex>& data,
                             const std::vector<double>& targets, const AffinityTrainConfig& cfg,
                             const std::function<void(int, double, double)>& on_epoch) {
  cfg.validate();
  if (data.size() != targets.size()) throw ValidationError("affinity: one target per complex required");
  const int n = static_cast<int>(data.size());
  const int n_val = static_cast<int>(std::floor(n * cfg.validation_fraction));
  const int n_train = n - n_val;
  if (n_train < 1) throw ValidationError("affinity: no training complexes left after the validation split");
  const std::vector<chem::MaskedComplex> val_data(data.begin() + n_train, data.end());
  const std::vector<double> val_targets(targets.begin() + n_train, targets.end());

  const NoiseSchedule s = w.schedule.build();
  const int T = s.steps();
  egnn::ModelParams& params = w.params;
  std::vector<Mat*> ptrs;
  for (int i = 0; i < params.affinity.size(); ++i) ptrs.push_back(&params.affinity.at(i));
  training::Adam adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps);
  adam.attach(ptrs, nullptr);

  AffinityTrace trace;
  for (int epoch = w.affinity_epoch; epoch < cfg.epochs; ++epoch) {
    diffusion::Rng rng(derive_seed(cfg.seed ^ 0xAFF1AFF1ULL, static_cast<std::uint64_t>(epoch)));
    std::vector<int> order(static_cast<std::size_t>(n_train));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(n_train));
    for (auto& sd : seeds) sd = rng();

    double sse = 0;
    for (int start = 0; start < n_train; start += cfg.batch_size) {
      const int B = std::min(cfg.batch_size, n_train - start);
      std::vector<std::vector<Mat>> grads(static_cast<std::size_t>(B));
      std::vector<double> sq(static_cast<std::size_t>(B));
      parallel_for(B, cfg.threads, [&](int i) {
        const auto k = static_cast<std::size_t>(start + i);
        const auto idx = static_cast<std::size_t>(order[k]);
        diffusion::Rng r(seeds[k]);
        const Complex cx = prepare_complex(data[idx].pocket, data[idx].part, cfg.padding.draw(r), params.vocab);
        const int t = std::uniform_int_distribution<int>(1, T)(r);
        const NoisedState st = noised_from_clean(cx, params.config.atom_types, s, t, r);
        const HeadInputs in = head_inputs(params, cx, st, T);
        ad::Tape tp(true);
        std::vector<Var> hp;
        for (int p = 0; p < params.affinity.size(); ++p) hp.push_back(tp.param(params.affinity.at(p)));
        Var a = head_on_tape(tp, params, hp, tp.constant(in.h_lig), tp.constant(in.time), tp.constant(in.weights));
        Var d = tp.affine(a, 1.0, -targets[idx]);
        Var loss = tp.mul(d, d);
        sq[static_cast<std::size_t>(i)] = tp.value(loss)(0, 0);
        tp.backward(loss);
        for (Var v : hp) grads[static_cast<std::size_t>(i)].push_back(tp.grad(v));
      });
      std::vector<Mat> g = std::move(grads[0]);
      for (int i = 1; i < B; ++i) {
        for (std::size_t p = 0; p < g.size(); ++p) g[p] += grads[static_cast<std::size_t>(i)][p];
      }
      for (auto& gi : g) gi /= static_cast<double>(B);
      for (double v : sq) sse += v;
      adam.step(g);
    }
    if (!params.affinity.all_finite()) throw NumericError("affinity head became non-finite");
    const double mse = sse / n_train;
    const double vr = val_data.empty()
                          ? std::nan("")
                          : affinity_rmse(params, val_data, val_targets, s, derive_seed(cfg.seed, 0x5EED), cfg.padding,
                                          cfg.threads);
    trace.train_mse.push_back(mse);
    trace.val_rmse.push_back(vr);
    w.affinity_epoch = epoch + 1;
    if (on_epoch) on_epoch(epoch + 1, mse, vr);
  }
  return trace;
}

Mat guide_coords(const Mat& mu, double beta, const Mat* grad, double s, diffusion::Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Mat x = mu;
  if (grad) {
    if (grad->rows() != mu.rows() || grad->cols() != mu.cols()) throw ValidationError("guide_coords: shape mismatch");
    x += (s * beta) * *grad;
  }
  const double sd = std::sqrt(beta);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] += sd * n01(rng);
  return x;
}

Mat guide_categorical(const Mat& p, const Mat& grad, double r, double delta, int* warnings) {
  if (p.rows() != grad.rows() || p.cols() != grad.cols()) throw ValidationError("guide_categorical: shape mismatch");
  Mat out(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double z = 0;
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      double e = r * grad(i, c);
      if (std::isnan(e) || e > 50.0 || e < -50.0) {
        e = std::isnan(e) ? 0.0 : std::clamp(e, -50.0, 50.0);
        if (warnings) ++*warnings;
      }
      out(i, c) = (p(i, c) + delta) * std::exp(e);
      z += out(i, c);
    }
    out.row(i) /= z;
  }
  return out;
}

}  // namespace leop::affinity
