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

// Reverse-process generation with fixed pocket and retained atoms.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "leop/affinity.hpp"
#include "leop/chem.hpp"
#include "leop/complex.hpp"
#include "leop/diffusion.hpp"
#include "leop/egnn.hpp"
#include "leop/schedule.hpp"

namespace leop::sampler {

using ad::Mat;
using diffusion::NoisedState;

struct SampleRunConfig {
  int n_samples = 100;
  affinity::GuidanceConfig guidance;
  std::uint64_t seed = 0;
  PaddingPolicy padding;
  int threads = 0;

  void validate() const;
};

struct StepStats {
  int degenerate_rows = 0;
  int clamp_warnings = 0;
};

/// Coordinates ~ N(center, I); atom and bond rows drawn from the uniform
/// categorical (one row per unordered pair, so bonds are symmetric).
NoisedState sample_prior(int n_mask, int n_pairs, const Eigen::RowVector3d& center, int k_atoms, int k_bonds,
                         diffusion::Rng& rng);

/// Scalars of one reverse transition t -> t-1.
struct ReverseCoefs {
  double beta_tilde = 0;
  double coef_xt = 0;
  double coef_x0 = 0;
  double keep_step = 0;  // sqrt(alpha_step(t))
  double keep_prev = 0;  // sqrt(alpha(t-1))
  bool final_step = false;

  static ReverseCoefs at(const NoiseSchedule& s, int t);
};

struct Prediction {
  Mat x0_hat, v_hat, b_hat;
};

struct GuidanceGrads {
  Mat x, v, b;
};

/// Categorical rows are guided (when grads are given), passed through the
/// posterior and sampled (argmax on the final step); coordinates are drawn
/// from the shifted Gaussian. Random draws are identical with and without
/// guidance.
NoisedState reverse_step(const NoisedState& st, const ReverseCoefs& c, const Prediction& pred,
                         const GuidanceGrads* grads, const affinity::GuidanceConfig& g, diffusion::Rng& rng,
                         StepStats* stats = nullptr);

/// Denoiser forward, optional affinity gradients, then reverse_step.
NoisedState denoise_step(const egnn::ModelParams& params, const Complex& cx, const NoisedState& st,
                         const NoiseSchedule& s, const affinity::GuidanceConfig& g, diffusion::Rng& rng,
                         StepStats* stats = nullptr);

/// Runs denoise_step from st.t down to 0.
NoisedState run_chain(const egnn::ModelParams& params, const Complex& cx, NoisedState st, const NoiseSchedule& s,
                      const affinity::GuidanceConfig& g, diffusion::Rng& rng, StepStats* stats = nullptr);

/// Removes FAKE atoms together with their bond rows and columns. When `kept`
/// is given it receives the original index of every surviving atom.
chem::Molecule3D strip_fake(const chem::Molecule3D& mol, const chem::AtomVocab& vocab,
                            std::vector<int>* kept = nullptr);

struct SampleRecord {
  int index = 0;
  std::uint64_t seed = 0;
  int n_mask = 0;       // mask slots including fake padding
  int n_generated = 0;  // mask slots decoded as real atoms
  bool guided = false;
  double predicted_affinity = 0;
  std::optional<double> oracle_affinity;
  std::optional<chem::Molecule3D> molecule;  // empty when every slot decoded as FAKE
  std::vector<int> kept;                     // original (padded) index of each emitted atom
  std::optional<double> fragment_rmsd;       // scaffold hopping only
  StepStats stats;
  // Filled by callers that know them.
  std::string target;
  std::optional<double> reference_affinity;
};

/// n_samples molecules for one pocket. `part` supplies the retained atoms and
/// the number of mask slots before padding; clean mask values are ignored.
std::vector<SampleRecord> generate(const egnn::ModelParams& params, const NoiseSchedule& s,
                                   const chem::PocketContext& pocket, const chem::LigandPartition& part,
                                   const SampleRunConfig& cfg);

/// Renoises the fragment for t_hop forward steps and denoises it back. No fake
/// padding is added; fragment_rmsd compares regenerated and original
/// fragment positions.
std::vector<SampleRecord> scaffold_hop(const egnn::ModelParams& params, const NoiseSchedule& s,
                                       const chem::PocketContext& pocket, const chem::Molecule3D& ligand,
                                       const std::vector<int>& fragment, int t_hop, const SampleRunConfig& cfg);

/// Writes one SDF per emitted molecule and manifest.json into dir.
void write_run(const std::filesystem::path& dir, const std::vector<SampleRecord>& records,
               const chem::AtomVocab& vocab, const nlohmann::json& meta);

}  // namespace leop::sampler
