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

// Equivariant denoiser over a pocket-ligand complex.
//
// Each layer rebuilds a k-nearest-neighbour graph over all atoms and uses the
// complete ligand graph with bond states. Node states are updated from both
// graphs, bond states by directional message passing, and coordinates by
// relative-vector sums applied to mask atoms only. Two softmax heads read out
// the clean atom and bond categories.

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "leop/autodiff.hpp"
#include "leop/chem.hpp"
#include "leop/complex.hpp"
#include "leop/diffusion.hpp"

namespace leop::egnn {

using ad::Mat;

struct ModelConfig {
  int layers = 4;
  int hidden = 64;
  int edge_hidden = 32;
  int knn = 16;
  int time_dim = 16;
  int rbf = 16;
  double rbf_max = 10.0;
  int atom_types = 7;
  int bond_types = chem::kNumBondTypes;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Ordered collection of named arrays.
class ParamStore {
 public:
  int add(std::string name, Mat value);
  int index(std::string_view name) const;
  int size() const { return static_cast<int>(values_.size()); }
  Mat& at(int i) { return values_[static_cast<std::size_t>(i)]; }
  const Mat& at(int i) const { return values_[static_cast<std::size_t>(i)]; }
  const std::string& name(int i) const { return names_[static_cast<std::size_t>(i)]; }
  std::size_t scalar_count() const;
  bool all_finite() const;

 private:
  std::vector<std::string> names_;
  std::vector<Mat> values_;
};

/// Two-layer perceptron whose first layer is split per input block so that
/// node-level blocks can be projected once and gathered onto edges.
struct Mlp {
  std::vector<int> w_in;
  int b1 = -1;
  int w_time = -1;  // -1 when not time conditioned
  int w2 = -1;
  int b2 = -1;
};

struct LayerIds {
  Mlp msg_knn;    // phi_mK: h_i, h_j, rbf, edge label
  Mlp pair;       // phi_d: rbf, e
  Mlp msg_lig;    // phi_mL: h_i, h_j, m_ji
  Mlp node;       // phi_h
  Mlp edge;       // phi_e: h_i, h_j, h_k, m_kj, m_ji
  Mlp coord_knn;  // phi_xK: h_i, h_j, rbf
  Mlp coord_lig;  // phi_xL: h_i, h_j, rbf, m_ji
};

struct ModelParams {
  ModelConfig config;
  chem::AtomVocab vocab = chem::AtomVocab::standard();
  std::uint64_t seed = 0;
  ParamStore denoiser;
  ParamStore affinity;

  // Indices into the stores.
  int emb_type = -1, emb_flag = -1, emb_bias = -1, emb_time = -1;
  int bond_type = -1, bond_flag = -1, bond_bias = -1;
  std::vector<LayerIds> layers;
  Mlp atom_head, bond_head;
  Mlp affinity_head;

  /// Deterministic initialization; coordinate output layers start at zero.
  static ModelParams init(const ModelConfig& config, const chem::AtomVocab& vocab, std::uint64_t seed);

  /// Re-derives the index tables from store names (after loading a file).
  void bind();
};

/// Sinusoidal features of the normalized step t / T.
Mat time_features(double t_frac, int dim);

// ---------------------------------------------------------------- graphs

enum class EdgeLabel : int { kProteinProtein = 0, kLigandLigand = 1, kProteinLigand = 2 };

struct ComplexGraph {
  // knn edges: message flows src -> dst, src is one of the k nearest to dst.
  std::vector<int> knn_src, knn_dst;
  std::vector<EdgeLabel> knn_label;
  // Ordered ligand pairs (node indices), complete graph without self loops.
  std::vector<int> lig_src, lig_dst;
};

/// Nodes 0..n_pocket-1 are pocket atoms; the rest are ligand atoms. Neighbours
/// are ranked by distance with ties going to the lower index.
ComplexGraph build_complex_graph(const chem::Coords& pocket_x, const chem::Coords& ligand_x, int k);
ComplexGraph build_complex_graph(const Mat& all_x, int n_pocket, int k);

// ---------------------------------------------------------------- forward

struct Upstream {
  Mat x0_hat;  // m x 3, may be empty
  Mat v_hat;   // m x K_v, may be empty
  Mat b_hat;   // P x K_b, may be empty
};

struct Gradients {
  std::vector<Mat> denoiser;  // aligned with ModelParams::denoiser
  std::vector<Mat> affinity;  // aligned with ModelParams::affinity
  Mat x;  // m x 3, mask atoms only
  Mat v;  // m x K_v
  Mat b;  // P x K_b
};

/// One recorded evaluation of the denoiser. Owns its tape.
class Forward {
 public:
  Forward(const ModelParams& params, const Complex& cx, const diffusion::NoisedState& state, int T, bool record);

  ad::Tape& tape() { return *tape_; }
  const ModelParams& params() const { return *params_; }
  const ad::Tape& tape() const { return *tape_; }

  ad::Var x0_hat() const { return x0_hat_; }
  ad::Var v_hat() const { return v_hat_; }
  ad::Var b_hat() const { return b_hat_; }
  /// Final node states (pocket rows first).
  ad::Var h() const { return h_; }
  ad::Var e() const { return e_; }
  ad::Var time() const { return time_; }
  /// Leaves holding the noised mask atom types and bond types.
  ad::Var v_input() const { return v_in_; }
  ad::Var b_input() const { return b_in_; }
  /// All final coordinates (pocket rows first), centered frame.
  ad::Var coords() const { return x_; }

  const ComplexGraph& last_graph() const { return last_graph_; }
  int n_pocket() const { return n_pocket_; }

  /// Vars of the affinity head parameters, created on first use.
  const std::vector<ad::Var>& affinity_param_vars();

  /// Backpropagates sum(<upstream_k, output_k>) and returns all gradients.
  Gradients backward(const Upstream& up);
  /// Backpropagates an arbitrary scalar built on this tape.
  Gradients backward_scalar(ad::Var root);

 private:
  Gradients collect() const;

  const ModelParams* params_;
  std::unique_ptr<ad::Tape> tape_;
  std::vector<ad::Var> dparams_;
  std::vector<ad::Var> aparams_;
  ad::Var x_in_, v_in_, b_in_;
  ad::Var x0_hat_, v_hat_, b_hat_, h_, e_, time_, x_;
  ComplexGraph last_graph_;
  int n_pocket_ = 0;
};

}  // namespace leop::egnn
