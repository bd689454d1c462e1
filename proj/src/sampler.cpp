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

#include "leop/sampler.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "leop/error.hpp"
#include "leop/parallel.hpp"
#include "leop/rng.hpp"
#include "leop/weights.hpp"

namespace leop::sampler {

void SampleRunConfig::validate() const {
  if (n_samples < 1) throw ValidationError("sampling: n_samples must be >= 1");
  if (threads < 0) throw ValidationError("sampling: threads must be >= 0");
  guidance.validate();
  padding.validate();
}

NoisedState sample_prior(int n_mask, int n_pairs, const Eigen::RowVector3d& center, int k_atoms, int k_bonds,
                         diffusion::Rng& rng) {
  if (n_mask < 1) throw ValidationError("sample_prior: n_mask must be >= 1");
  if (n_pairs < 0 || k_atoms < 2 || k_bonds < 2) throw ValidationError("sample_prior: bad sizes");
  NoisedState st;
  std::normal_distribution<double> n01(0.0, 1.0);
  st.x.resize(n_mask, 3);
  for (int i = 0; i < n_mask; ++i) {
    for (int c = 0; c < 3; ++c) st.x(i, c) = center(c) + n01(rng);
  }
  st.v = diffusion::sample_onehot(Mat::Constant(n_mask, k_atoms, 1.0 / k_atoms), rng);
  st.b = diffusion::sample_onehot(Mat::Constant(n_pairs, k_bonds, 1.0 / k_bonds), rng);
  return st;
}

ReverseCoefs ReverseCoefs::at(const NoiseSchedule& s, int t) {
  const StepParams p = step_params(s, t);
  ReverseCoefs c;
  c.beta_tilde = p.beta_tilde;
  c.coef_xt = p.coef_xt;
  c.coef_x0 = p.coef_x0;
  c.keep_step = std::sqrt(p.alpha_step);
  c.keep_prev = std::sqrt(s.alpha(t - 1));
  c.final_step = t == 1;
  return c;
}

NoisedState reverse_step(const NoisedState& st, const ReverseCoefs& c, const Prediction& pred,
                         const GuidanceGrads* grads, const affinity::GuidanceConfig& g, diffusion::Rng& rng,
                         StepStats* stats) {
  if (st.t < 1) throw ValidationError("reverse_step: t must be >= 1");
  const bool guided = grads != nullptr && g.active();
  int warnings = 0;
  Mat pv = guided ? affinity::guide_categorical(st.v, grads->v, g.r1, g.delta, &warnings) : st.v;
  Mat pb = (guided && st.b.rows() > 0) ? affinity::guide_categorical(st.b, grads->b, g.r2, g.delta, &warnings) : st.b;

  int degenerate = 0;
  auto decode = [&](const Mat& pt, const Mat& p0) -> Mat {
    if (pt.rows() == 0) return Mat(0, pt.cols());
    std::vector<int> bad;
    Mat post = diffusion::categorical_posterior(pt, p0, c.keep_step, c.keep_prev, &bad);
    for (int r : bad) post.row(r).setConstant(1.0 / static_cast<double>(post.cols()));
    degenerate += static_cast<int>(bad.size());
    return c.final_step ? diffusion::argmax_onehot(post) : diffusion::sample_onehot(post, rng);
  };
  NoisedState out;
  out.t = st.t - 1;
  out.v = decode(pv, pred.v_hat);
  out.b = decode(pb, pred.b_hat);
  const Mat mu = c.coef_xt * st.x + c.coef_x0 * pred.x0_hat;
  out.x = affinity::guide_coords(mu, c.beta_tilde, guided ? &grads->x : nullptr, g.s, rng);
  if (!out.x.allFinite()) throw NumericError("reverse step produced non-finite coordinates");
  if (stats) {
    stats->degenerate_rows += degenerate;
    stats->clamp_warnings += warnings;
  }
  return out;
}

NoisedState denoise_step(const egnn::ModelParams& params, const Complex& cx, const NoisedState& st,
                         const NoiseSchedule& s, const affinity::GuidanceConfig& g, diffusion::Rng& rng,
                         StepStats* stats) {
  const ReverseCoefs c = ReverseCoefs::at(s, st.t);
  egnn::Forward f(params, cx, st, s.steps(), g.active());
  ad::Tape& tp = f.tape();
  Prediction pred{tp.value(f.x0_hat()), tp.value(f.v_hat()), tp.value(f.b_hat())};
  if (!g.active()) return reverse_step(st, c, pred, nullptr, g, rng, stats);
  const ad::Var a = affinity::affinity_on_tape(f, cx);
  egnn::Gradients gr = f.backward_scalar(a);
  GuidanceGrads gg{std::move(gr.x), std::move(gr.v), std::move(gr.b)};
  return reverse_step(st, c, pred, &gg, g, rng, stats);
}

NoisedState run_chain(const egnn::ModelParams& params, const Complex& cx, NoisedState st, const NoiseSchedule& s,
                      const affinity::GuidanceConfig& g, diffusion::Rng& rng, StepStats* stats) {
  while (st.t > 0) st = denoise_step(params, cx, st, s, g, rng, stats);
  return st;
}

chem::Molecule3D strip_fake(const chem::Molecule3D& mol, const chem::AtomVocab& vocab, std::vector<int>* kept) {
  std::vector<int> keep;
  for (int i = 0; i < mol.size(); ++i) {
    if (!vocab.is_fake(mol.atom_type[static_cast<std::size_t>(i)])) keep.push_back(i);
  }
  chem::Molecule3D out(static_cast<int>(keep.size()));
  for (std::size_t a = 0; a < keep.size(); ++a) {
    out.x.row(static_cast<Eigen::Index>(a)) = mol.x.row(keep[a]);
    out.atom_type[a] = mol.atom_type[static_cast<std::size_t>(keep[a])];
    for (std::size_t b = a + 1; b < keep.size(); ++b) {
      out.set_bond(static_cast<int>(a), static_cast<int>(b), mol.bond(keep[a], keep[b]));
    }
  }
  if (kept) *kept = std::move(keep);
  return out;
}

namespace {

void finish(SampleRecord& rec, const egnn::ModelParams& params, const NoiseSchedule& s, const chem::PocketContext& pocket,
            const Complex& cx, const NoisedState& st) {
  const chem::Molecule3D full = assemble_ligand(cx, st);
  rec.n_mask = cx.n_mask();
  rec.n_generated = 0;
  for (int a : cx.mask_atoms) rec.n_generated += !params.vocab.is_fake(full.atom_type[static_cast<std::size_t>(a)]);
  rec.predicted_affinity = affinity::predict_affinity(params, cx, st, s.steps());
  if (rec.n_generated == 0) return;
  rec.molecule = strip_fake(full, params.vocab, &rec.kept);
  rec.oracle_affinity = chem::oracle_affinity(pocket, *rec.molecule, params.vocab);
}

}  // namespace

std::vector<SampleRecord> generate(const egnn::ModelParams& params, const NoiseSchedule& s,
                                   const chem::PocketContext& pocket, const chem::LigandPartition& part,
                                   const SampleRunConfig& cfg) {
  cfg.validate();
  const int Kv = params.config.atom_types, Kb = params.config.bond_types;
  std::vector<SampleRecord> out(static_cast<std::size_t>(cfg.n_samples));
  parallel_for(cfg.n_samples, cfg.threads, [&](int i) {
    SampleRecord& rec = out[static_cast<std::size_t>(i)];
    rec.index = i;
    rec.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
    rec.guided = cfg.guidance.active();
    diffusion::Rng rng(rec.seed);
    const Complex cx = prepare_complex(pocket, part, cfg.padding.draw(rng), params.vocab);
    NoisedState st = sample_prior(cx.n_mask(), cx.n_pairs(), Eigen::RowVector3d::Zero(), Kv, Kb, rng);
    st.t = s.steps();
    st = run_chain(params, cx, std::move(st), s, cfg.guidance, rng, &rec.stats);
    finish(rec, params, s, pocket, cx, st);
  });
  return out;
}

std::vector<SampleRecord> scaffold_hop(const egnn::ModelParams& params, const NoiseSchedule& s,
                                       const chem::PocketContext& pocket, const chem::Molecule3D& ligand,
                                       const std::vector<int>& fragment, int t_hop, const SampleRunConfig& cfg) {
  cfg.validate();
  if (t_hop < 1 || t_hop > s.steps()) {
    throw ValidationError("scaffold_hop: t_hop must lie in [1, " + std::to_string(s.steps()) + "]");
  }
  const Complex cx = make_complex(pocket, chem::partition_retain_mask(ligand, fragment));
  std::vector<SampleRecord> out(static_cast<std::size_t>(cfg.n_samples));
  parallel_for(cfg.n_samples, cfg.threads, [&](int i) {
    SampleRecord& rec = out[static_cast<std::size_t>(i)];
    rec.index = i;
    rec.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
    rec.guided = cfg.guidance.active();
    diffusion::Rng rng(rec.seed);
    NoisedState st = affinity::noised_from_clean(cx, params.config.atom_types, s, t_hop, rng);
    st = run_chain(params, cx, std::move(st), s, cfg.guidance, rng, &rec.stats);
    double sq = 0;
    for (int r = 0; r < cx.n_mask(); ++r) {
      sq += (st.x.row(r) - cx.ligand.x.row(cx.mask_atoms[static_cast<std::size_t>(r)])).squaredNorm();
    }
    rec.fragment_rmsd = std::sqrt(sq / cx.n_mask());
    finish(rec, params, s, pocket, cx, st);
  });
  return out;
}

void write_run(const std::filesystem::path& dir, const std::vector<SampleRecord>& records,
               const chem::AtomVocab& vocab, const nlohmann::json& meta) {
  std::filesystem::create_directories(dir);
  nlohmann::json rows = nlohmann::json::array();
  int emitted = 0;
  for (const auto& r : records) {
    nlohmann::json row = {{"index", r.index},
                          {"target", r.target},
                          {"seed", r.seed},
                          {"n_mask", r.n_mask},
                          {"n_generated", r.n_generated},
                          {"guided", r.guided},
                          {"predicted_affinity", r.predicted_affinity},
                          {"oracle_affinity", nullptr},
                          {"reference_affinity", nullptr},
                          {"ligand_file", nullptr},
                          {"degenerate_rows", r.stats.degenerate_rows},
                          {"clamp_warnings", r.stats.clamp_warnings}};
    if (r.oracle_affinity) row["oracle_affinity"] = *r.oracle_affinity;
    if (r.reference_affinity) row["reference_affinity"] = *r.reference_affinity;
    if (r.fragment_rmsd) row["fragment_rmsd"] = *r.fragment_rmsd;
    if (r.molecule) {
      char name[64];
      std::snprintf(name, sizeof(name), "sample_%05d.sdf", r.index);
      write_file_atomic(dir / name, chem::write_sdf(*r.molecule, vocab, name));
      row["ligand_file"] = name;
      ++emitted;
    }
    rows.push_back(std::move(row));
  }
  nlohmann::json manifest = meta;
  manifest["n_samples"] = records.size();
  manifest["n_emitted"] = emitted;
  manifest["n_empty"] = static_cast<int>(records.size()) - emitted;
  manifest["samples"] = std::move(rows);
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace leop::sampler
