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

#include "leop/egnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "leop/error.hpp"

namespace leop::egnn {

void ModelConfig::validate() const {
  auto bad = [](const std::string& what) { throw ValidationError("model config: " + what); };
  if (layers < 1) bad("layers must be >= 1");
  if (hidden < 1 || edge_hidden < 1) bad("widths must be >= 1");
  if (knn < 1) bad("knn must be >= 1");
  if (time_dim < 2 || time_dim % 2 != 0) bad("time_dim must be an even number >= 2");
  if (rbf < 2) bad("rbf must be >= 2");
  if (!(rbf_max > 0)) bad("rbf_max must be positive");
  if (atom_types < 2) bad("atom_types must be >= 2");
  if (bond_types != chem::kNumBondTypes) bad("bond_types must equal the bond vocabulary size");
}

int ParamStore::add(std::string name, Mat value) {
  if (std::find(names_.begin(), names_.end(), name) != names_.end()) {
    throw ValidationError("duplicate parameter name '" + name + "'");
  }
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return size() - 1;
}

int ParamStore::index(std::string_view name) const {
  for (int i = 0; i < size(); ++i) {
    if (names_[static_cast<std::size_t>(i)] == name) return i;
  }
  throw ValidationError("missing parameter '" + std::string(name) + "'");
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
  return n;
}

bool ParamStore::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](const Mat& m) { return m.allFinite(); });
}

namespace {

struct Block {
  std::string name;
  int dim;
};

// Registers (or looks up, when rng is null) one perceptron.
class Registrar {
 public:
  Registrar(ParamStore& store, std::mt19937_64* rng) : store_(store), rng_(rng) {}

  Mlp mlp(const std::string& prefix, const std::vector<Block>& blocks, int time_dim, int hidden, int out,
          bool zero_out) {
    Mlp m;
    int fan_in = time_dim;
    for (const auto& b : blocks) fan_in += b.dim;
    for (const auto& b : blocks) m.w_in.push_back(get(prefix + ".w_" + b.name, b.dim, hidden, fan_in));
    m.b1 = get(prefix + ".b1", 1, hidden, 0);
    if (time_dim > 0) m.w_time = get(prefix + ".w_time", time_dim, hidden, fan_in);
    m.w2 = get(prefix + ".w2", hidden, out, zero_out ? 0 : hidden);
    m.b2 = get(prefix + ".b2", 1, out, 0);
    return m;
  }

  // fan_in == 0 means zero initialization.
  int get(const std::string& name, int rows, int cols, int fan_in) {
    if (!rng_) {
      const int id = store_.index(name);
      if (store_.at(id).rows() != rows || store_.at(id).cols() != cols) {
        throw ValidationError("parameter '" + name + "' has an unexpected shape");
      }
      return id;
    }
    Mat w = Mat::Zero(rows, cols);
    if (fan_in > 0) {
      std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = n(*rng_);
    }
    return store_.add(name, std::move(w));
  }

 private:
  ParamStore& store_;
  std::mt19937_64* rng_;
};

void build_tables(ModelParams& p, std::mt19937_64* rng) {
  const ModelConfig& c = p.config;
  const int H = c.hidden, He = c.edge_hidden, R = c.rbf, Tf = c.time_dim;
  Registrar d(p.denoiser, rng);
  p.emb_type = d.get("emb.w_type", c.atom_types, H, c.atom_types + 2 + Tf);
  p.emb_flag = d.get("emb.w_flag", 2, H, c.atom_types + 2 + Tf);
  p.emb_bias = d.get("emb.b", 1, H, 0);
  p.emb_time = d.get("emb.w_time", Tf, H, c.atom_types + 2 + Tf);
  p.bond_type = d.get("bond.w_type", c.bond_types, He, c.bond_types + 1);
  p.bond_flag = d.get("bond.w_flag", 1, He, c.bond_types + 1);
  p.bond_bias = d.get("bond.b", 1, He, 0);
  p.layers.clear();
  for (int l = 0; l < c.layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    LayerIds ids;
    ids.msg_knn = d.mlp(pre + "msg_knn", {{"hi", H}, {"hj", H}, {"rbf", R}, {"label", 3}}, Tf, H, H, false);
    ids.pair = d.mlp(pre + "pair", {{"rbf", R}, {"e", He}}, 0, He, He, false);
    ids.msg_lig = d.mlp(pre + "msg_lig", {{"hi", H}, {"hj", H}, {"m", He}}, Tf, H, H, false);
    ids.node = d.mlp(pre + "node", {{"dh", H}}, 0, H, H, false);
    ids.edge = d.mlp(pre + "edge", {{"hi", H}, {"hj", H}, {"hk", H}, {"mkj", He}, {"mji", He}}, Tf, He, He, false);
    ids.coord_knn = d.mlp(pre + "coord_knn", {{"hi", H}, {"hj", H}, {"rbf", R}}, Tf, H, 1, true);
    ids.coord_lig = d.mlp(pre + "coord_lig", {{"hi", H}, {"hj", H}, {"rbf", R}, {"m", He}}, Tf, H, 1, true);
    p.layers.push_back(std::move(ids));
  }
  p.atom_head = d.mlp("head.atom", {{"h", H}}, 0, H, c.atom_types, false);
  p.bond_head = d.mlp("head.bond", {{"e", He}}, 0, He, c.bond_types, false);
  Registrar a(p.affinity, rng);
  p.affinity_head = a.mlp("affinity", {{"h", H}}, Tf, H, 1, false);
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& config, const chem::AtomVocab& vocab, std::uint64_t seed) {
  config.validate();
  if (config.atom_types != vocab.size()) throw ValidationError("model config atom_types differs from vocabulary");
  ModelParams p;
  p.config = config;
  p.vocab = vocab;
  p.seed = seed;
  std::mt19937_64 rng(seed);
  build_tables(p, &rng);
  return p;
}

void ModelParams::bind() {
  config.validate();
  build_tables(*this, nullptr);
}

Mat time_features(double t_frac, int dim) {
  Mat tf(1, dim);
  const int half = dim / 2;
  for (int k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * k / half);
    const double ang = 1000.0 * t_frac * freq;
    tf(0, 2 * k) = std::sin(ang);
    tf(0, 2 * k + 1) = std::cos(ang);
  }
  return tf;
}

// ---------------------------------------------------------------- graphs

ComplexGraph build_complex_graph(const Mat& all_x, int n_pocket, int k) {
  if (k < 1) throw ValidationError("knn: k must be >= 1");
  const int n = static_cast<int>(all_x.rows());
  if (n < 2) throw ValidationError("knn: need at least 2 atoms");
  ComplexGraph g;
  const int kk = std::min(k, n - 1);
  std::vector<std::pair<double, int>> cand(static_cast<std::size_t>(n - 1));
  for (int i = 0; i < n; ++i) {
    int c = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      cand[static_cast<std::size_t>(c++)] = {(all_x.row(i) - all_x.row(j)).squaredNorm(), j};
    }
    std::partial_sort(cand.begin(), cand.begin() + kk, cand.end());
    for (int r = 0; r < kk; ++r) {
      const int j = cand[static_cast<std::size_t>(r)].second;
      g.knn_src.push_back(j);
      g.knn_dst.push_back(i);
      const bool pi = i < n_pocket, pj = j < n_pocket;
      g.knn_label.push_back(pi && pj     ? EdgeLabel::kProteinProtein
                            : !pi && !pj ? EdgeLabel::kLigandLigand
                                         : EdgeLabel::kProteinLigand);
    }
  }
  for (int a = n_pocket; a < n; ++a) {
    for (int b = n_pocket; b < n; ++b) {
      if (a == b) continue;
      g.lig_src.push_back(a);
      g.lig_dst.push_back(b);
    }
  }
  return g;
}

ComplexGraph build_complex_graph(const chem::Coords& pocket_x, const chem::Coords& ligand_x, int k) {
  Mat all(pocket_x.rows() + ligand_x.rows(), 3);
  all.topRows(pocket_x.rows()) = pocket_x;
  all.bottomRows(ligand_x.rows()) = ligand_x;
  return build_complex_graph(all, static_cast<int>(pocket_x.rows()), k);
}

// ---------------------------------------------------------------- forward

namespace {

constexpr double kLigandNorm = 10.0;
constexpr double kDistEps = 1e-8;

struct NodeBlock {
  ad::Var h;
  const std::vector<int>* index;
};

}  // namespace

Forward::Forward(const ModelParams& params, const Complex& cx, const diffusion::NoisedState& st, int T, bool record)
    : params_(&params), tape_(std::make_unique<ad::Tape>(record)) {
  ad::Tape& tp = *tape_;
  const ModelConfig& cfg = params.config;
  const int NP = cx.pocket.size();
  const int NL = cx.n_ligand();
  const int n = NP + NL;
  const int m = cx.n_mask();
  const int P = cx.n_pairs();
  const int Kv = cfg.atom_types, Kb = cfg.bond_types;
  n_pocket_ = NP;
  if (st.x.rows() != m || st.x.cols() != 3 || st.v.rows() != m || st.v.cols() != Kv || st.b.rows() != P ||
      st.b.cols() != Kb) {
    throw ValidationError("denoiser: state shape does not match the complex");
  }
  if (T < 1 || st.t < 0 || st.t > T) throw ValidationError("denoiser: step outside [0, T]");

  for (int i = 0; i < params.denoiser.size(); ++i) dparams_.push_back(tp.param(params.denoiser.at(i)));
  auto W = [&](int id) { return dparams_[static_cast<std::size_t>(id)]; };

  x_in_ = tp.input(st.x);
  v_in_ = tp.input(st.v);
  b_in_ = tp.input(st.b);
  time_ = tp.constant(time_features(static_cast<double>(st.t) / T, cfg.time_dim));

  std::vector<int> mask_nodes(static_cast<std::size_t>(m));
  for (int r = 0; r < m; ++r) mask_nodes[static_cast<std::size_t>(r)] = NP + cx.mask_atoms[static_cast<std::size_t>(r)];

  auto bias = [&](const Mlp& mlp) {
    return mlp.w_time >= 0 ? tp.add(W(mlp.b1), tp.matmul(time_, W(mlp.w_time))) : W(mlp.b1);
  };
  auto pre = [&](const Mlp& mlp, std::initializer_list<NodeBlock> nodes, std::initializer_list<ad::Var> edges) {
    ad::Var acc;
    std::size_t b = 0;
    auto push = [&](ad::Var term) { acc = acc.valid() ? tp.add(acc, term) : term; };
    for (const NodeBlock& nb : nodes) {
      ad::Var proj = tp.matmul(nb.h, W(mlp.w_in[b++]));
      push(nb.index ? tp.gather_rows(proj, *nb.index) : proj);
    }
    for (ad::Var ev : edges) push(tp.matmul(ev, W(mlp.w_in[b++])));
    return tp.add_row(acc, bias(mlp));
  };
  auto out = [&](const Mlp& mlp, ad::Var z) { return tp.add_row(tp.matmul(tp.silu(z), W(mlp.w2)), W(mlp.b2)); };

  // Coordinates: fixed rows are constants, mask rows come from the input leaf.
  Mat xconst = Mat::Zero(n, 3);
  xconst.topRows(NP) = cx.pocket.x;
  for (int a : cx.retained_atoms) xconst.row(NP + a) = cx.ligand.x.row(a);
  ad::Var x = tp.add(tp.constant(std::move(xconst)), tp.scatter_add_rows(x_in_, mask_nodes, n));

  // Node embedding.
  Mat tconst = Mat::Zero(n, Kv);
  Mat flags = Mat::Zero(n, 2);
  for (int i = 0; i < NP; ++i) tconst(i, cx.pocket.atom_type[static_cast<std::size_t>(i)]) = 1.0;
  for (int a : cx.retained_atoms) tconst(NP + a, cx.ligand.atom_type[static_cast<std::size_t>(a)]) = 1.0;
  for (int a = 0; a < NL; ++a) {
    flags(NP + a, 0) = 1.0;
    flags(NP + a, 1) = cx.mask[static_cast<std::size_t>(a)] ? 1.0 : 0.0;
  }
  ad::Var h = tp.add(tp.matmul(tp.constant(std::move(tconst)), W(params.emb_type)),
                     tp.scatter_add_rows(tp.matmul(v_in_, W(params.emb_type)), mask_nodes, n));
  h = tp.add(h, tp.matmul(tp.constant(std::move(flags)), W(params.emb_flag)));
  h = tp.add_row(h, tp.add(W(params.emb_bias), tp.matmul(time_, W(params.emb_time))));

  // Ordered ligand pairs: index of a -> b.
  auto pid = [NL](int a, int b) { return a * (NL - 1) + (b < a ? b : b - 1); };
  const int EL = NL * (NL - 1);
  Mat bconst = Mat::Zero(EL, Kb);
  Mat bflag = Mat::Zero(EL, 1);
  for (int a = 0; a < NL; ++a) {
    for (int b = 0; b < NL; ++b) {
      if (a == b || cx.mask[static_cast<std::size_t>(a)] || cx.mask[static_cast<std::size_t>(b)]) continue;
      bconst(pid(a, b), cx.ligand.bond_type(a, b)) = 1.0;
      bflag(pid(a, b), 0) = 1.0;
    }
  }
  std::vector<int> pair_src, pair_dst, fwd_pairs, rev_pairs;
  for (int q = 0; q < P; ++q) {
    auto [i, j] = cx.diffused_pairs[static_cast<std::size_t>(q)];
    pair_src.push_back(q);
    pair_dst.push_back(pid(i, j));
    pair_src.push_back(q);
    pair_dst.push_back(pid(j, i));
    fwd_pairs.push_back(pid(i, j));
    rev_pairs.push_back(pid(j, i));
  }
  ad::Var e = tp.matmul(tp.constant(std::move(bconst)), W(params.bond_type));
  if (P > 0) {
    e = tp.add(e, tp.scatter_add_rows(tp.gather_rows(tp.matmul(b_in_, W(params.bond_type)), pair_src), pair_dst, EL));
  }
  e = tp.add_row(tp.add(e, tp.matmul(tp.constant(std::move(bflag)), W(params.bond_flag))), W(params.bond_bias));

  // Ligand pair endpoints (node ids) in pid order, and triplets k -> j -> i.
  std::vector<int> lsrc(static_cast<std::size_t>(EL)), ldst(static_cast<std::size_t>(EL));
  for (int a = 0; a < NL; ++a) {
    for (int b = 0; b < NL; ++b) {
      if (a == b) continue;
      lsrc[static_cast<std::size_t>(pid(a, b))] = NP + a;
      ldst[static_cast<std::size_t>(pid(a, b))] = NP + b;
    }
  }
  std::vector<int> tri_i, tri_j, tri_k, tri_q, tri_p;
  for (int j = 0; j < NL; ++j) {
    for (int i = 0; i < NL; ++i) {
      if (i == j) continue;
      for (int k = 0; k < NL; ++k) {
        if (k == i || k == j) continue;
        tri_i.push_back(NP + i);
        tri_j.push_back(NP + j);
        tri_k.push_back(NP + k);
        tri_q.push_back(pid(k, j));
        tri_p.push_back(pid(j, i));
      }
    }
  }

  Mat maskcol = Mat::Zero(n, 1);
  for (int node : mask_nodes) maskcol(node, 0) = 1.0;
  ad::Var maskv = tp.constant(std::move(maskcol));

  std::vector<double> centers(static_cast<std::size_t>(cfg.rbf));
  const double spacing = cfg.rbf_max / (cfg.rbf - 1);
  for (int r = 0; r < cfg.rbf; ++r) centers[static_cast<std::size_t>(r)] = r * spacing;
  const double gamma = 0.5 / (spacing * spacing);
  const double knn_norm = 1.0 / cfg.knn;
  const double lig_norm = 1.0 / kLigandNorm;

  for (int l = 0; l < cfg.layers; ++l) {
    const LayerIds& L = params.layers[static_cast<std::size_t>(l)];
    last_graph_ = build_complex_graph(tp.value(x), NP, cfg.knn);
    const ComplexGraph& g = last_graph_;
    const auto EK = static_cast<Eigen::Index>(g.knn_src.size());
    Mat lbl = Mat::Zero(EK, 3);
    for (Eigen::Index r = 0; r < EK; ++r) lbl(r, static_cast<int>(g.knn_label[static_cast<std::size_t>(r)])) = 1.0;
    ad::Var lblv = tp.constant(std::move(lbl));

    ad::Var relK = tp.sub(tp.gather_rows(x, g.knn_src), tp.gather_rows(x, g.knn_dst));
    ad::Var dK = tp.sqrt(tp.affine(tp.row_sqnorm(relK), 1.0, kDistEps));
    ad::Var rbfK = tp.rbf(dK, centers, gamma);

    ad::Var msgK = out(L.msg_knn, pre(L.msg_knn, {{h, &g.knn_dst}, {h, &g.knn_src}}, {rbfK, lblv}));
    ad::Var dh = tp.scale(tp.scatter_add_rows(msgK, g.knn_dst, n), knn_norm);

    ad::Var relL = tp.sub(tp.gather_rows(x, lsrc), tp.gather_rows(x, ldst));
    ad::Var dL = tp.sqrt(tp.affine(tp.row_sqnorm(relL), 1.0, kDistEps));
    ad::Var rbfL = tp.rbf(dL, centers, gamma);
    ad::Var mpair = out(L.pair, pre(L.pair, {}, {rbfL, e}));
    ad::Var msgL = out(L.msg_lig, pre(L.msg_lig, {{h, &ldst}, {h, &lsrc}}, {mpair}));
    dh = tp.add(dh, tp.scale(tp.scatter_add_rows(msgL, ldst, n), lig_norm));

    h = tp.add(h, out(L.node, pre(L.node, {{dh, nullptr}}, {})));

    if (NL >= 3) {
      ad::Var pt = tp.add(tp.gather_rows(tp.matmul(h, W(L.edge.w_in[0])), tri_i),
                          tp.gather_rows(tp.matmul(h, W(L.edge.w_in[1])), tri_j));
      pt = tp.add(pt, tp.gather_rows(tp.matmul(h, W(L.edge.w_in[2])), tri_k));
      pt = tp.add(pt, tp.gather_rows(tp.matmul(mpair, W(L.edge.w_in[3])), tri_q));
      pt = tp.add(pt, tp.gather_rows(tp.matmul(mpair, W(L.edge.w_in[4])), tri_p));
      pt = tp.add_row(pt, bias(L.edge));
      ad::Var agg = tp.scatter_add_rows(tp.silu(pt), tri_p, EL);
      ad::Var upd = tp.add_row(tp.matmul(agg, W(L.edge.w2)), tp.scale(W(L.edge.b2), NL - 2));
      e = tp.add(e, tp.scale(upd, lig_norm));
    }

    ad::Var wK = out(L.coord_knn, pre(L.coord_knn, {{h, &g.knn_dst}, {h, &g.knn_src}}, {rbfK}));
    ad::Var cK = tp.mul(wK, tp.reciprocal(tp.affine(dK, 1.0, 1.0)));
    ad::Var dx = tp.scale(tp.scatter_add_rows(tp.mul_col(relK, cK), g.knn_dst, n), knn_norm);
    ad::Var wL = out(L.coord_lig, pre(L.coord_lig, {{h, &ldst}, {h, &lsrc}}, {rbfL, mpair}));
    ad::Var cL = tp.mul(wL, tp.reciprocal(tp.affine(dL, 1.0, 1.0)));
    dx = tp.add(dx, tp.scale(tp.scatter_add_rows(tp.mul_col(relL, cL), ldst, n), lig_norm));
    x = tp.add(x, tp.mul_col(dx, maskv));

    if (!tp.value(h).allFinite() || !tp.value(e).allFinite() || !tp.value(x).allFinite()) {
      throw NumericError("denoiser produced a non-finite value", l);
    }
  }

  x_ = x;
  h_ = h;
  e_ = e;
  x0_hat_ = tp.gather_rows(x, mask_nodes);
  v_hat_ = tp.softmax_rows(out(params.atom_head, pre(params.atom_head, {{h, &mask_nodes}}, {})));
  if (P > 0) {
    ad::Var s = tp.add(tp.gather_rows(e, fwd_pairs), tp.gather_rows(e, rev_pairs));
    b_hat_ = tp.softmax_rows(out(params.bond_head, pre(params.bond_head, {}, {s})));
  } else {
    b_hat_ = tp.constant(Mat::Zero(0, Kb));
  }
}

const std::vector<ad::Var>& Forward::affinity_param_vars() {
  if (aparams_.empty()) {
    for (int i = 0; i < params_->affinity.size(); ++i) aparams_.push_back(tape_->param(params_->affinity.at(i)));
  }
  return aparams_;
}

Gradients Forward::backward(const Upstream& up) {
  ad::Tape& tp = *tape_;
  ad::Var total;
  auto term = [&](const Mat& g, ad::Var v) {
    if (g.size() == 0) return;
    const Mat& val = tp.value(v);
    if (g.rows() != val.rows() || g.cols() != val.cols()) throw UsageError("upstream gradient shape mismatch");
    ad::Var t = tp.sum(tp.mul(tp.constant(g), v));
    total = total.valid() ? tp.add(total, t) : t;
  };
  term(up.x0_hat, x0_hat_);
  term(up.v_hat, v_hat_);
  term(up.b_hat, b_hat_);
  if (!total.valid()) total = tp.constant(Mat::Zero(1, 1));
  return backward_scalar(total);
}

Gradients Forward::backward_scalar(ad::Var root) {
  if (!tape_->recording()) throw UsageError("backward requires a forward pass recorded with record = true");
  tape_->backward(root);
  return collect();
}

Gradients Forward::collect() const {
  Gradients g;
  for (ad::Var v : dparams_) g.denoiser.push_back(tape_->grad(v));
  if (!aparams_.empty()) {
    for (ad::Var v : aparams_) g.affinity.push_back(tape_->grad(v));
  } else {
    for (int i = 0; i < params_->affinity.size(); ++i) {
      g.affinity.push_back(Mat::Zero(params_->affinity.at(i).rows(), params_->affinity.at(i).cols()));
    }
  }
  g.x = tape_->grad(x_in_);
  g.v = tape_->grad(v_in_);
  g.b = tape_->grad(b_in_);
  return g;
}

}  // namespace leop::egnn
