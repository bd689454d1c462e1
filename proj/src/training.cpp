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

#include "leop/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "leop/error.hpp"
#include "leop/parallel.hpp"
#include "leop/rng.hpp"

namespace leop::training {

using ad::Mat;
using diffusion::NoisedState;

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { throw ValidationError("train config: " + what); };
  if (!(lambda_atom >= 0) || !(lambda_bond >= 0)) bad("lambda_atom and lambda_bond must be >= 0");
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) bad("learning_rate must be >= 0");
  if (batch_size < 1) bad("batch_size must be >= 1");
  if (epochs < 0) bad("epochs must be >= 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) bad("beta1 and beta2 must lie in [0, 1)");
  if (!(eps > 0)) bad("eps must be positive");
  if (threads < 0) bad("threads must be >= 0");
  padding.validate();
}

double kl_rows(const Mat& q, const Mat& p) {
  if (q.rows() != p.rows() || q.cols() != p.cols()) throw ValidationError("kl: shape mismatch");
  if (q.rows() == 0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const double qi = q.data()[i];
    if (qi > 0) acc += qi * (std::log(qi) - std::log(p.data()[i]));
  }
  return acc / static_cast<double>(q.rows());
}

namespace {

double entropy_term(const Mat& q) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (q.data()[i] > 0) acc += q.data()[i] * std::log(q.data()[i]);
  }
  return acc;
}

struct NoisedPair {
  NoisedState prev, cur;
};

NoisedPair draw_pair(const NoisedState& clean, const NoiseSchedule& s, int t, diffusion::Rng& rng) {
  NoisedPair d;
  d.prev.t = t - 1;
  d.prev.x = diffusion::q_marginal_coords(clean.x, s, t - 1, rng);
  d.prev.v = diffusion::sample_onehot(diffusion::q_marginal_categorical(clean.v, s, t - 1), rng);
  d.prev.b = diffusion::sample_onehot(diffusion::q_marginal_categorical(clean.b, s, t - 1), rng);
  d.cur.t = t;
  d.cur.x = diffusion::q_step_coords(d.prev.x, s, t, rng);
  d.cur.v = diffusion::sample_onehot(diffusion::q_step_categorical(d.prev.v, s, t), rng);
  d.cur.b = diffusion::sample_onehot(diffusion::q_step_categorical(d.prev.b, s, t), rng);
  return d;
}

// KL(q || posterior(p_t, p0_hat)) averaged over rows, on the tape.
ad::Var kl_on_tape(ad::Tape& tp, const Mat& q, const Mat& p_t, ad::Var p0_hat, double keep_step, double keep_prev) {
  const double rows = static_cast<double>(q.rows());
  ad::Var p = diffusion::categorical_posterior(tp, p_t, p0_hat, keep_step, keep_prev);
  ad::Var cross = tp.sum(tp.mul(tp.constant(q), tp.log(p)));
  return tp.affine(cross, -1.0 / rows, entropy_term(q) / rows);
}

}  // namespace

LossBreakdown losses_for_prediction(const Complex& cx, const NoiseSchedule& s, int t, const NoisedState& prev,
                                    const NoisedState& cur, const Mat& x0_hat, const Mat& v_hat, const Mat& b_hat,
                                    double lambda_atom, double lambda_bond) {
  const auto sp = step_params(s, t);
  const NoisedState clean = clean_state(cx, static_cast<int>(cur.v.cols()));
  LossBreakdown l;
  l.t = t;
  const Mat mu = sp.coef_xt * cur.x + sp.coef_x0 * x0_hat;
  l.l_pos = (prev.x - mu).rowwise().squaredNorm().sum() / static_cast<double>(cur.x.rows());
  const Mat qv = diffusion::q_posterior_categorical(cur.v, clean.v, s, t);
  const Mat pv = diffusion::q_posterior_categorical(cur.v, v_hat, s, t);
  l.l_atom = kl_rows(qv, pv);
  if (cur.b.rows() > 0) {
    const Mat qb = diffusion::q_posterior_categorical(cur.b, clean.b, s, t);
    const Mat pb = diffusion::q_posterior_categorical(cur.b, b_hat, s, t);
    l.l_bond = kl_rows(qb, pb);
  }
  l.total = l.l_pos + lambda_atom * l.l_atom + lambda_bond * l.l_bond;
  return l;
}

LossResult compute_losses(const egnn::ModelParams& params, const Complex& cx, const NoiseSchedule& s, int t,
                          diffusion::Rng& rng, double lambda_atom, double lambda_bond, bool want_grads) {
  const int T = s.steps();
  if (t < 1 || t > T) throw ValidationError("compute_losses: t must lie in [1, T]");
  const int Kv = params.config.atom_types;
  const NoisedState clean = clean_state(cx, Kv);
  const NoisedPair d = draw_pair(clean, s, t, rng);
  const auto sp = step_params(s, t);
  const double keep_step = std::sqrt(s.alpha_step(t));
  const double keep_prev = std::sqrt(s.alpha(t - 1));

  egnn::Forward f(params, cx, d.cur, T, want_grads);
  ad::Tape& tp = f.tape();
  const double m = cx.n_mask();
  ad::Var mu = tp.add(tp.scale(f.x0_hat(), sp.coef_x0), tp.constant(sp.coef_xt * d.cur.x));
  ad::Var l_pos = tp.scale(tp.sum(tp.row_sqnorm(tp.sub(mu, tp.constant(d.prev.x)))), 1.0 / m);

  const Mat qv = diffusion::q_posterior_categorical(d.cur.v, clean.v, s, t);
  ad::Var l_atom = kl_on_tape(tp, qv, d.cur.v, f.v_hat(), keep_step, keep_prev);
  ad::Var total = tp.add(l_pos, tp.scale(l_atom, lambda_atom));
  LossResult r;
  if (cx.n_pairs() > 0) {
    const Mat qb = diffusion::q_posterior_categorical(d.cur.b, clean.b, s, t);
    ad::Var l_bond = kl_on_tape(tp, qb, d.cur.b, f.b_hat(), keep_step, keep_prev);
    total = tp.add(total, tp.scale(l_bond, lambda_bond));
    r.loss.l_bond = tp.value(l_bond)(0, 0);
  }
  r.loss.t = t;
  r.loss.l_pos = tp.value(l_pos)(0, 0);
  r.loss.l_atom = tp.value(l_atom)(0, 0);
  r.loss.total = tp.value(total)(0, 0);
  if (!std::isfinite(r.loss.total)) throw NumericError("non-finite training loss at t=" + std::to_string(t));
  if (want_grads) r.grads = f.backward_scalar(total).denoiser;
  return r;
}

void Adam::attach(std::vector<Mat*> params, OptimizerState* resume) {
  params_ = std::move(params);
  if (resume) {
    if (resume->m.size() != params_.size() || resume->v.size() != params_.size()) {
      throw ValidationError("optimizer state does not match the parameters");
    }
    state_ = *resume;
    return;
  }
  state_ = OptimizerState{};
  for (const Mat* p : params_) {
    state_.m.push_back(Mat::Zero(p->rows(), p->cols()));
    state_.v.push_back(Mat::Zero(p->rows(), p->cols()));
  }
}

void Adam::step(const std::vector<Mat>& grads) {
  if (grads.size() != params_.size()) throw ValidationError("adam: gradient count mismatch");
  ++state_.step;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(state_.step));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(state_.step));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Mat& m = state_.m[i];
    Mat& v = state_.v[i];
    const Mat& g = grads[i];
    m = b1_ * m + (1.0 - b1_) * g;
    v = b2_ * v + (1.0 - b2_) * g.cwiseProduct(g);
    Mat& p = *params_[i];
    p.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }
}

namespace {

// Visiting order and per-sample seeds of one epoch.
struct EpochPlan {
  std::vector<int> order;
  std::vector<std::uint64_t> seeds;
};

EpochPlan plan_epoch(std::uint64_t seed, int epoch, int n) {
  diffusion::Rng rng(derive_seed(seed, static_cast<std::uint64_t>(epoch)));
  EpochPlan p;
  p.order.resize(static_cast<std::size_t>(n));
  std::iota(p.order.begin(), p.order.end(), 0);
  std::shuffle(p.order.begin(), p.order.end(), rng);
  p.seeds.resize(static_cast<std::size_t>(n));
  for (auto& sd : p.seeds) sd = rng();
  return p;
}

LossResult sample_loss(const egnn::ModelParams& params, const chem::MaskedComplex& ex, std::uint64_t seed,
                       const NoiseSchedule& s, const TrainConfig& cfg, bool want_grads) {
  diffusion::Rng r(seed);
  const int extra = cfg.padding.draw(r);
  const Complex cx = prepare_complex(ex.pocket, ex.part, extra, params.vocab);
  const int t = std::uniform_int_distribution<int>(1, s.steps())(r);
  return compute_losses(params, cx, s, t, r, cfg.lambda_atom, cfg.lambda_bond, want_grads);
}

void accumulate(LossBreakdown& sum, const LossBreakdown& l) {
  sum.l_pos += l.l_pos;
  sum.l_atom += l.l_atom;
  sum.l_bond += l.l_bond;
  sum.total += l.total;
}

LossBreakdown divide(const LossBreakdown& sum, int n) {
  LossBreakdown m;
  m.l_pos = sum.l_pos / n;
  m.l_atom = sum.l_atom / n;
  m.l_bond = sum.l_bond / n;
  m.total = sum.total / n;
  return m;
}

}  // namespace

LossBreakdown mean_loss(const WeightsFile& w, const std::vector<chem::MaskedComplex>& data, const TrainConfig& cfg,
                        int epoch) {
  cfg.validate();
  if (data.empty()) throw ValidationError("mean_loss: empty dataset");
  const NoiseSchedule s = w.schedule.build();
  const int n = static_cast<int>(data.size());
  const EpochPlan plan = plan_epoch(cfg.seed, epoch, n);
  std::vector<LossBreakdown> res(static_cast<std::size_t>(n));
  parallel_for(n, cfg.threads, [&](int i) {
    const auto k = static_cast<std::size_t>(i);
    res[k] = sample_loss(w.params, data[static_cast<std::size_t>(plan.order[k])], plan.seeds[k], s, cfg, false).loss;
  });
  LossBreakdown sum;
  for (const auto& l : res) accumulate(sum, l);
  return divide(sum, n);
}

std::vector<LossBreakdown> train(WeightsFile& w, const std::vector<chem::MaskedComplex>& data, const TrainConfig& cfg,
                                 const TrainHooks& hooks) {
  cfg.validate();
  if (data.empty()) throw ValidationError("train: empty dataset");
  if (w.epoch > cfg.epochs) throw ValidationError("train: checkpoint is past the requested epoch count");
  const NoiseSchedule s = w.schedule.build();
  auto& store = w.params.denoiser;
  std::vector<Mat*> ptrs;
  for (int i = 0; i < store.size(); ++i) ptrs.push_back(&store.at(i));
  Adam adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps);
  adam.attach(ptrs, w.optimizer ? &*w.optimizer : nullptr);

  const int n = static_cast<int>(data.size());
  const int steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const double total_steps = static_cast<double>(steps_per_epoch) * cfg.epochs;
  std::vector<LossBreakdown> trace;
  for (int epoch = w.epoch; epoch < cfg.epochs; ++epoch) {
    const EpochPlan plan = plan_epoch(cfg.seed, epoch, n);
    LossBreakdown sum;
    for (int start = 0; start < n; start += cfg.batch_size) {
      if (cfg.cosine_decay) {
        const double step = static_cast<double>(epoch) * steps_per_epoch + start / cfg.batch_size;
        adam.set_learning_rate(0.5 * cfg.learning_rate * (1.0 + std::cos(std::numbers::pi * step / total_steps)));
      }
      const int B = std::min(cfg.batch_size, n - start);
      std::vector<LossResult> res(static_cast<std::size_t>(B));
      parallel_for(B, cfg.threads, [&](int i) {
        const auto k = static_cast<std::size_t>(start + i);
        res[static_cast<std::size_t>(i)] =
            sample_loss(w.params, data[static_cast<std::size_t>(plan.order[k])], plan.seeds[k], s, cfg, true);
      });
      std::vector<Mat> grads = std::move(res[0].grads);
      for (int i = 1; i < B; ++i) {
        for (std::size_t p = 0; p < grads.size(); ++p) grads[p] += res[static_cast<std::size_t>(i)].grads[p];
      }
      for (auto& g : grads) g /= static_cast<double>(B);
      for (const auto& r : res) accumulate(sum, r.loss);
      adam.step(grads);
    }
    if (!store.all_finite()) {
      throw NumericError("parameters became non-finite during epoch " + std::to_string(epoch + 1));
    }
    const LossBreakdown mean = divide(sum, n);
    trace.push_back(mean);
    w.epoch = epoch + 1;
    w.optimizer = adam.state();
    if (!hooks.checkpoint.empty()) save_weights(hooks.checkpoint, w);
    if (hooks.on_epoch) hooks.on_epoch(epoch + 1, mean);
  }
  return trace;
}

ReconstructionAccuracy reconstruction_accuracy(const egnn::ModelParams& params, const std::vector<chem::MaskedComplex>& data,
                                               const NoiseSchedule& s, int t_max, std::uint64_t seed,
                                               const PaddingPolicy& padding, int threads) {
  if (t_max < 1 || t_max > s.steps()) throw ValidationError("reconstruction_accuracy: t_max outside [1, T]");
  const int n = static_cast<int>(data.size());
  std::vector<long> atom_ok(static_cast<std::size_t>(n)), atom_n(static_cast<std::size_t>(n));
  std::vector<long> bond_ok(static_cast<std::size_t>(n)), bond_n(static_cast<std::size_t>(n));
  parallel_for(n, threads, [&](int i) {
    const auto k = static_cast<std::size_t>(i);
    diffusion::Rng r(derive_seed(seed, k));
    const Complex cx = prepare_complex(data[k].pocket, data[k].part, padding.draw(r), params.vocab);
    const int t = std::uniform_int_distribution<int>(1, t_max)(r);
    const NoisedState clean = clean_state(cx, params.config.atom_types);
    NoisedState st;
    st.t = t;
    st.x = diffusion::q_marginal_coords(clean.x, s, t, r);
    st.v = diffusion::sample_onehot(diffusion::q_marginal_categorical(clean.v, s, t), r);
    st.b = diffusion::sample_onehot(diffusion::q_marginal_categorical(clean.b, s, t), r);
    egnn::Forward f(params, cx, st, s.steps(), false);
    const auto pv = diffusion::argmax_rows(f.tape().value(f.v_hat()));
    const auto tv = diffusion::argmax_rows(clean.v);
    for (std::size_t a = 0; a < pv.size(); ++a) atom_ok[k] += pv[a] == tv[a];
    atom_n[k] = static_cast<long>(pv.size());
    if (cx.n_pairs() > 0) {
      const auto pb = diffusion::argmax_rows(f.tape().value(f.b_hat()));
      const auto tb = diffusion::argmax_rows(clean.b);
      for (std::size_t q = 0; q < pb.size(); ++q) bond_ok[k] += pb[q] == tb[q];
      bond_n[k] = static_cast<long>(pb.size());
    }
  });
  ReconstructionAccuracy acc;
  long aok = 0, bok = 0;
  for (int i = 0; i < n; ++i) {
    aok += atom_ok[static_cast<std::size_t>(i)];
    bok += bond_ok[static_cast<std::size_t>(i)];
    acc.atoms += atom_n[static_cast<std::size_t>(i)];
    acc.bonds += bond_n[static_cast<std::size_t>(i)];
  }
  acc.atom = acc.atoms ? static_cast<double>(aok) / acc.atoms : 0.0;
  acc.bond = acc.bonds ? static_cast<double>(bok) / acc.bonds : 0.0;
  return acc;
}

}  // namespace leop::training
