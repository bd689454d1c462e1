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

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// A Tape records every operation applied to its Vars. Calling backward() on a
// 1x1 Var propagates adjoints to every node that was created from a leaf with
// gradient tracking (params and inputs). Constants never receive gradients.

#include <Eigen/Core>

#include <functional>
#include <span>
#include <vector>

namespace leop::ad {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

enum class Unary { kSilu, kSigmoid, kLog, kExp, kSqrt, kReciprocal, kSquare };

class Tape {
 public:
  /// With record = false no backward closures are kept; values only.
  explicit Tape(bool record = true) : record_(record) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Mat value);
  Var input(Mat value);
  /// Leaf that references caller-owned storage; it must outlive the tape.
  Var param(const Mat& value);

  const Mat& value(Var v) const;
  /// Adjoint of v after backward(); zeros if nothing reached it.
  Mat grad(Var v) const;
  bool has_grad(Var v) const;

  bool recording() const { return record_; }
  bool backward_done() const { return backward_done_; }
  std::size_t size() const { return nodes_.size(); }

  void backward(Var root);

  // Linear algebra.
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var add_row(Var a, Var row);
  Var mul(Var a, Var b);
  Var mul_col(Var a, Var col);
  Var scale(Var a, double s);
  Var affine(Var a, double s, double c);
  Var unary(Var a, Unary op);
  Var silu(Var a) { return unary(a, Unary::kSilu); }
  Var sigmoid(Var a) { return unary(a, Unary::kSigmoid); }
  Var log(Var a) { return unary(a, Unary::kLog); }
  Var sqrt(Var a) { return unary(a, Unary::kSqrt); }
  Var reciprocal(Var a) { return unary(a, Unary::kReciprocal); }

  // Structural.
  Var gather_rows(Var a, std::vector<int> index);
  Var scatter_add_rows(Var a, std::vector<int> index, int n_out);
  Var concat_cols(std::span<const Var> parts);
  Var row_sum(Var a);
  Var sum(Var a);
  Var softmax_rows(Var a);
  Var row_sqnorm(Var a);
  /// Gaussian radial basis expansion of an n x 1 column.
  Var rbf(Var d, std::span<const double> centers, double gamma);

 private:
  struct Node {
    Mat own;
    const Mat* ref = nullptr;
    Mat grad;
    bool needs_grad = false;
    std::function<void(Tape&)> back;
    const Mat& val() const { return ref ? *ref : own; }
  };

  Var push(Mat value, bool needs_grad);
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }
  Mat& g(int id);
  void check(Var v) const;
  void on_back(Var out, std::function<void(Tape&)> fn);

  bool record_;
  bool backward_done_ = false;
  std::vector<Node> nodes_;
};

}  // namespace leop::ad
