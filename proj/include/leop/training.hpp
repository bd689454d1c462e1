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

// Denoiser training: composite loss over sampled steps and Adam updates.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "leop/chem.hpp"
#include "leop/complex.hpp"
#include "leop/egnn.hpp"
#include "leop/schedule.hpp"
#include "leop/weights.hpp"

namespace leop::training {

struct LossBreakdown {
  double l_pos = 0;
  double l_atom = 0;
  double l_bond = 0;
  double total = 0;
  int t = 0;
};

struct TrainConfig {
  double lambda_atom = 100.0;
  double lambda_bond = 100.0;
  double learning_rate = 1e-3;
  int batch_size = 8;
  int epochs = 200;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int threads = 0;  // 0 = all cores
  /// Cosine decay of the learning rate to zero over all optimizer steps.
  bool cosine_decay = false;
  PaddingPolicy padding;

  void validate() const;
};

/// Mean over rows of KL(q_row || p_row); q entries of 0 contribute 0.
double kl_rows(const ad::Mat& q, const ad::Mat& p);

struct LossResult {
  LossBreakdown loss;
  std::vector<ad::Mat> grads;  // aligned with the denoiser store; empty unless requested
};

/// Draws M^{t-1} from the marginal and M^t from one forward step, then
/// evaluates the three loss terms. Gradients are returned when want_grads.
LossResult compute_losses(const egnn::ModelParams& params, const Complex& cx, const NoiseSchedule& s, int t,
                          diffusion::Rng& rng, double lambda_atom, double lambda_bond, bool want_grads);

/// Same, with the model posterior replaced by a caller-supplied prediction
/// (used to check the loss definitions in isolation).
LossBreakdown losses_for_prediction(const Complex& cx, const NoiseSchedule& s, int t, const diffusion::NoisedState& prev,
                                    const diffusion::NoisedState& cur, const ad::Mat& x0_hat, const ad::Mat& v_hat,
                                    const ad::Mat& b_hat, double lambda_atom, double lambda_bond);

/// Adam over a list of arrays.
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}
  /// Initializes or adopts moments shaped like `params`.
  void attach(std::vector<ad::Mat*> params, OptimizerState* resume);
  void step(const std::vector<ad::Mat>& grads);
  void set_learning_rate(double lr) { lr_ = lr; }
  OptimizerState state() const { return state_; }

 private:
  double lr_, b1_, b2_, eps_;
  std::vector<ad::Mat*> params_;
  OptimizerState state_;
};

struct TrainHooks {
  /// Called after every epoch with the epoch index (1-based) and mean losses.
  std::function<void(int, const LossBreakdown&)> on_epoch;
  /// Written after every epoch when non-empty.
  std::filesystem::path checkpoint;
};

/// Trains w.params.denoiser from epoch w.epoch up to cfg.epochs. Each epoch
/// draws its randomness from (cfg.seed, epoch) so resumed runs match
/// uninterrupted ones.
std::vector<LossBreakdown> train(WeightsFile& w, const std::vector<chem::MaskedComplex>& data, const TrainConfig& cfg,
                                 const TrainHooks& hooks = {});

/// Mean losses of the current parameters over the sample draws that epoch
/// `epoch` of train() would use, without updating anything.
LossBreakdown mean_loss(const WeightsFile& w, const std::vector<chem::MaskedComplex>& data, const TrainConfig& cfg,
                        int epoch);

/// Argmax reconstruction accuracy of atom and bond types on clean-sample
/// predictions at steps drawn uniformly from [1, t_max].
struct ReconstructionAccuracy {
  double atom = 0;
  double bond = 0;
  long atoms = 0;
  long bonds = 0;
};
ReconstructionAccuracy reconstruction_accuracy(const egnn::ModelParams& params, const std::vector<chem::MaskedComplex>& data,
                                               const NoiseSchedule& s, int t_max, std::uint64_t seed,
                                               const PaddingPolicy& padding, int threads = 0);

}  // namespace leop::training
