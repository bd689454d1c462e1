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

#include "leop/autodiff.hpp"

#include <cmath>
#include <utility>

#include "leop/error.hpp"

namespace leop::ad {

Var Tape::push(Mat value, bool needs_grad) {
  Node n;
  n.own = std::move(value);
  n.needs_grad = needs_grad && record_;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::check(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw UsageError("autodiff: variable does not belong to this tape");
  }
}

Mat& Tape::g(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.val().rows(), n.val().cols());
  return n.grad;
}

void Tape::on_back(Var out, std::function<void(Tape&)> fn) {
  if (nodes_[out.id].needs_grad) nodes_[out.id].back = std::move(fn);
}

Var Tape::constant(Mat value) { return push(std::move(value), false); }

Var Tape::input(Mat value) { return push(std::move(value), true); }

Var Tape::param(const Mat& value) {
  Node n;
  n.ref = &value;
  n.needs_grad = record_;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Mat& Tape::value(Var v) const {
  check(v);
  return nodes_[v.id].val();
}

bool Tape::has_grad(Var v) const {
  check(v);
  return nodes_[v.id].grad.size() != 0;
}

Mat Tape::grad(Var v) const {
  check(v);
  const Node& n = nodes_[v.id];
  if (n.grad.size() == 0) return Mat::Zero(n.val().rows(), n.val().cols());
  return n.grad;
}

void Tape::backward(Var root) {
  check(root);
  if (!record_) throw UsageError("autodiff: backward on a tape that does not record");
  if (backward_done_) throw UsageError("autodiff: backward called twice on one tape");
  const Mat& r = value(root);
  if (r.rows() != 1 || r.cols() != 1) throw UsageError("autodiff: backward root must be 1x1");
  backward_done_ = true;
  if (!nodes_[root.id].needs_grad) return;
  g(root.id)(0, 0) = 1.0;
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.back && n.grad.size() != 0) n.back(*this);
  }
}

Var Tape::matmul(Var a, Var b) {
  check(a);
  check(b);
  const Mat& A = value(a);
  const Mat& B = value(b);
  if (A.cols() != B.rows()) throw UsageError("autodiff: matmul shape mismatch");
  Mat C = A * B;
  Var out = push(std::move(C), needs(a) || needs(b));
  on_back(out, [a, b, out](Tape& t) {
    const Mat& dC = t.nodes_[out.id].grad;
    if (t.needs(a)) t.g(a.id).noalias() += dC * t.value(b).transpose();
    if (t.needs(b)) t.g(b.id).noalias() += t.value(a).transpose() * dC;
  });
  return out;
}

Var Tape::add(Var a, Var b) {
  check(a);
  check(b);
  const Mat& A = value(a);
  const Mat& B = value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw UsageError("autodiff: add shape mismatch");
  Var out = push(A + B, needs(a) || needs(b));
  on_back(out, [a, b, out](Tape& t) {
    const Mat& dC = t.nodes_[out.id].grad;
    if (t.needs(a)) t.g(a.id) += dC;
    if (t.needs(b)) t.g(b.id) += dC;
  });
  return out;
}

Var Tape::sub(Var a, Var b) {
  check(a);
  check(b);
  const Mat& A = value(a);
  const Mat& B = value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw UsageError("autodiff: sub shape mismatch");
  Var out = push(A - B, needs(a) || needs(b));
  on_back(out, [a, b, out](Tape& t) {
    const Mat& dC = t.nodes_[out.id].grad;
    if (t.needs(a)) t.g(a.id) += dC;
    if (t.needs(b)) t.g(b.id) -= dC;
  });
  return out;
}

Var Tape::add_row(Var a, Var row) {
  check(a);
  check(row);
  const Mat& A = value(a);
  const Mat& R = value(row);
  if (R.rows() != 1 || R.cols() != A.cols()) throw UsageError("autodiff: add_row shape mismatch");
  Mat C = A;
  C.rowwise() += R.row(0);
  Var out = push(std::move(C), needs(a) || needs(row));
  on_back(out, [a, row, out](Tape& t) {
    const Mat& dC = t.nodes_[out.id].grad;
    if (t.needs(a)) t.g(a.id) += dC;
    if (t.needs(row)) t.g(row.id) += dC.colwise().sum();
  });
  return out;
}

Var Tape::mul(Var a, Var b) {
  check(a);
  check(b);
  const Mat& A = value(a);
  const Mat& B = value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw UsageError("autodiff: mul shape mismatch");
  Mat C = A.cwiseProduct(B);
  Var out = push(std::move(C), needs(a) || needs(b));
  on_back(out, [a, b, out](Tape& t) {
    const Mat& dC = t.nodes_[out.id].grad;
    if (t.needs(a)) t.g(a.id) += dC.cwiseProduct(t.value(b));
    if (t.needs(b)) t.g(b.id) += dC.cwiseProduct(t.value(a));
  });
  return out;
}

Var Tape::mul_col(Var a, Var col) {
  check(a);
  check(col);
  const Mat& A = value(a);
  const Mat& c = value(col);
  if (c.cols() != 1 || c.rows() != A.rows()) throw UsageError("autodiff: mul_col shape mismatch");
  Mat C = A.array().colwise() * c.col(0).array();
  Var out = push(std::move(C), needs(a) || needs(col));
  on_back(out, [a, col, out](Tape& t) {
    const Mat& dC = t.nodes_[out.id].grad;
    if (t.needs(a)) t.g(a.id).array() += dC.array().colwise() * t.value(col).col(0).array();
    if (t.needs(col)) t.g(col.id) += dC.cwiseProduct(t.value(a)).rowwise().sum();
  });
  return out;
}

Var Tape::scale(Var a, double s) { return affine(a, s, 0.0); }

Var Tape::affine(Var a, double s, double c) {
  check(a);
  Mat C = (value(a).array() * s + c).matrix();
  Var out = push(std::move(C), needs(a));
  on_back(out, [a, s, out](Tape& t) { t.g(a.id) += s * t.nodes_[out.id].grad; });
  return out;
}

Var Tape::unary(Var a, Unary op) {
  check(a);
  const Mat& A = value(a);
  Mat C(A.rows(), A.cols());
  const auto n = A.size();
  const double* x = A.data();
  double* y = C.data();
  Mat sig;  // kept for the silu derivative
  switch (op) {
    case Unary::kSilu:
      sig.resize(A.rows(), A.cols());
      for (Eigen::Index i = 0; i < n; ++i) {
        sig.data()[i] = 1.0 / (1.0 + std::exp(-x[i]));
        y[i] = x[i] * sig.data()[i];
      }
      break;
    case Unary::kSigmoid:
      for (Eigen::Index i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
      break;
    case Unary::kLog:
      for (Eigen::Index i = 0; i < n; ++i) y[i] = std::log(x[i]);
      break;
    case Unary::kExp:
      for (Eigen::Index i = 0; i < n; ++i) y[i] = std::exp(x[i]);
      break;
    case Unary::kSqrt:
      for (Eigen::Index i = 0; i < n; ++i) y[i] = std::sqrt(x[i]);
      break;
    case Unary::kReciprocal:
      for (Eigen::Index i = 0; i < n; ++i) y[i] = 1.0 / x[i];
      break;
    case Unary::kSquare:
      for (Eigen::Index i = 0; i < n; ++i) y[i] = x[i] * x[i];
      break;
  }
  Var out = push(std::move(C), needs(a));
  if (!nodes_[out.id].needs_grad) sig.resize(0, 0);
  on_back(out, [a, op, out, sig = std::move(sig)](Tape& t) {
    const Mat& dC = t.nodes_[out.id].grad;
    const Mat& X = t.value(a);
    const Mat& Y = t.nodes_[out.id].val();
    Mat& dA = t.g(a.id);
    const auto n = X.size();
    const double* x = X.data();
    const double* y = Y.data();
    const double* dy = dC.data();
    double* dx = dA.data();
    switch (op) {
      case Unary::kSilu:
        for (Eigen::Index i = 0; i < n; ++i) {
          const double s = sig.data()[i];
          dx[i] += dy[i] * (s + x[i] * s * (1.0 - s));
        }
        break;
      case Unary::kSigmoid:
        for (Eigen::Index i = 0; i < n; ++i) dx[i] += dy[i] * y[i] * (1.0 - y[i]);
        break;
      case Unary::kLog:
        for (Eigen::Index i = 0; i < n; ++i) dx[i] += dy[i] / x[i];
        break;
      case Unary::kExp:
        for (Eigen::Index i = 0; i < n; ++i) dx[i] += dy[i] * y[i];
        break;
      case Unary::kSqrt:
        for (Eigen::Index i = 0; i < n; ++i) dx[i] += dy[i] * 0.5 / y[i];
        break;
      case Unary::kReciprocal:
        for (Eigen::Index i = 0; i < n; ++i) dx[i] -= dy[i] * y[i] * y[i];
        break;
      case Unary::kSquare:
        for (Eigen::Index i = 0; i < n; ++i) dx[i] += 2.0 * dy[i] * x[i];
        break;
    }
  });
  return out;
}

Var Tape::gather_rows(Var a, std::vector<int> index) {
  check(a);
  const Mat& A = value(a);
  Mat C(static_cast<Eigen::Index>(index.size()), A.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] < 0 || index[r] >= A.rows()) throw UsageError("autodiff: gather index out of range");
    C.row(static_cast<Eigen::Index>(r)) = A.row(index[r]);
  }
  Var out = push(std::move(C), needs(a));
  on_back(out, [a, idx = std::move(index), out](Tape& t) {
    const Mat& dC = t.nodes_[out.id].grad;
    Mat& dA = t.g(a.id);
    for (std::size_t r = 0; r < idx.size(); ++r) dA.row(idx[r]) += dC.row(static_cast<Eigen::Index>(r));
  });
  return out;
}

Var Tape::scatter_add_rows(Var a, std::vector<int> index, int n_out) {
  check(a);
  const Mat& A = value(a);
  if (static_cast<Eigen::Index>(index.size()) != A.rows()) {
    throw UsageError("autodiff: scatter index length mismatch");
  }
  Mat C = Mat::Zero(n_out, A.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] < 0 || index[r] >= n_out) throw UsageError("autodiff: scatter index out of range");
    C.row(index[r]) += A.row(static_cast<Eigen::Index>(r));
  }
  Var out = push(std::move(C), needs(a));
  on_back(out, [a, idx = std::move(index), out](Tape& t) {
    const Mat& dC = t.nodes_[out.id].grad;
    Mat& dA = t.g(a.id);
    for (std::size_t r = 0; r < idx.size(); ++r) dA.row(static_cast<Eigen::Index>(r)) += dC.row(idx[r]);
  });
  return out;
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("autodiff: concat of nothing");
  Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  bool any = false;
  for (Var p : parts) {
    check(p);
    if (value(p).rows() != rows) throw UsageError("autodiff: concat row mismatch");
    cols += value(p).cols();
    any = any || needs(p);
  }
  Mat C(rows, cols);
  Eigen::Index off = 0;
  for (Var p : parts) {
    C.middleCols(off, value(p).cols()) = value(p);
    off += value(p).cols();
  }
  Var out = push(std::move(C), any);
  on_back(out, [ps = std::vector<Var>(parts.begin(), parts.end()), out](Tape& t) {
    const Mat& dC = t.nodes_[out.id].grad;
    Eigen::Index o = 0;
    for (Var p : ps) {
      const Eigen::Index c = t.value(p).cols();
      if (t.needs(p)) t.g(p.id) += dC.middleCols(o, c);
      o += c;
    }
  });
  return out;
}

Var Tape::row_sum(Var a) {
  check(a);
  Mat C = value(a).rowwise().sum();
  Var out = push(std::move(C), needs(a));
  on_back(out, [a, out](Tape& t) {
    const Mat& dC = t.nodes_[out.id].grad;
    t.g(a.id).colwise() += dC.col(0);
  });
  return out;
}

Var Tape::sum(Var a) {
  check(a);
  Mat C(1, 1);
  C(0, 0) = value(a).sum();
  Var out = push(std::move(C), needs(a));
  on_back(out, [a, out](Tape& t) { t.g(a.id).array() += t.nodes_[out.id].grad(0, 0); });
  return out;
}

Var Tape::softmax_rows(Var a) {
  check(a);
  const Mat& A = value(a);
  Mat C(A.rows(), A.cols());
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    const double m = A.row(r).maxCoeff();
    C.row(r) = (A.row(r).array() - m).exp().matrix();
    C.row(r) /= C.row(r).sum();
  }
  Var out = push(std::move(C), needs(a));
  on_back(out, [a, out](Tape& t) {
    const Mat& dC = t.nodes_[out.id].grad;
    const Mat& Y = t.nodes_[out.id].val();
    Mat& dA = t.g(a.id);
    for (Eigen::Index r = 0; r < Y.rows(); ++r) {
      const double dot = dC.row(r).dot(Y.row(r));
      dA.row(r).array() += Y.row(r).array() * (dC.row(r).array() - dot);
    }
  });
  return out;
}

Var Tape::row_sqnorm(Var a) {
  check(a);
  Mat C = value(a).rowwise().squaredNorm();
  Var out = push(std::move(C), needs(a));
  on_back(out, [a, out](Tape& t) {
    const Mat& dC = t.nodes_[out.id].grad;
    Mat& dA = t.g(a.id);
    const Mat& A = t.value(a);
    for (Eigen::Index r = 0; r < A.rows(); ++r) dA.row(r) += (2.0 * dC(r, 0)) * A.row(r);
  });
  return out;
}

Var Tape::rbf(Var d, std::span<const double> centers, double gamma) {
  check(d);
  const Mat& D = value(d);
  if (D.cols() != 1) throw UsageError("autodiff: rbf expects a column");
  const auto k = static_cast<Eigen::Index>(centers.size());
  Mat C(D.rows(), k);
  for (Eigen::Index r = 0; r < D.rows(); ++r) {
    for (Eigen::Index c = 0; c < k; ++c) {
      const double u = D(r, 0) - centers[static_cast<std::size_t>(c)];
      C(r, c) = std::exp(-gamma * u * u);
    }
  }
  Var out = push(std::move(C), needs(d));
  on_back(out, [d, cs = std::vector<double>(centers.begin(), centers.end()), gamma, out](Tape& t) {
    const Mat& dC = t.nodes_[out.id].grad;
    const Mat& Y = t.nodes_[out.id].val();
    const Mat& D = t.value(d);
    Mat& dD = t.g(d.id);
    for (Eigen::Index r = 0; r < D.rows(); ++r) {
      double acc = 0.0;
      for (Eigen::Index c = 0; c < Y.cols(); ++c) {
        acc += dC(r, c) * Y(r, c) * (-2.0 * gamma * (D(r, 0) - cs[static_cast<std::size_t>(c)]));
      }
      dD(r, 0) += acc;
    }
  });
  return out;
}

}  // namespace leop::ad
