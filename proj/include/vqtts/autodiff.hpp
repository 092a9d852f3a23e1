// include/vqtts/autodiff.hpp

// Copyright 2026  vqtts authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vqtts/common.hpp"
#include "vqtts/io.hpp"
#include "vqtts/rng.hpp"

namespace vqtts::ad {

using Mat = Eigen::MatrixXd;

// ------------------------------------------------------------------- params

// Named parameter with gradient and Adam moment buffers. Names use dotted
// paths ("decoder.gru.w_xz"); the prefix before the first dot is the
// parameter group used by checkpoint diffs.
struct Tensor {
  std::string name;
  Mat value;
  Mat grad;
  Mat adam_m;
  Mat adam_v;

  Tensor(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)),
        value(Mat::Zero(rows, cols)),
        grad(Mat::Zero(rows, cols)),
        adam_m(Mat::Zero(rows, cols)),
        adam_v(Mat::Zero(rows, cols)) {}
};

class ParamStore {
 public:
  Tensor& add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    VQTTS_REQUIRE(!find(name), "duplicate parameter name: " + name);
    tensors_.push_back(std::make_unique<Tensor>(name, rows, cols));
    return *tensors_.back();
  }

  Tensor& add_uniform(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                      double lo, double hi, Rng& rng) {
    Tensor& t = add(name, rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) t.value(r, c) = rng.uniform(lo, hi);
    return t;
  }

  // Scaled uniform init, fan-in based.
  Tensor& add_glorot(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                     Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    return add_uniform(name, rows, cols, -a, a, rng);
  }

  Tensor* find(const std::string& name) {
    for (auto& t : tensors_)
      if (t->name == name) return t.get();
    return nullptr;
  }

  Tensor& at(const std::string& name) {
    Tensor* t = find(name);
    if (!t) throw LookupError("no parameter named " + name);
    return *t;
  }

  std::vector<std::unique_ptr<Tensor>>& tensors() { return tensors_; }
  const std::vector<std::unique_ptr<Tensor>>& tensors() const { return tensors_; }

  void zero_grad() {
    for (auto& t : tensors_) t->grad.setZero();
  }

  double grad_norm() const {
    double sq = 0.0;
    for (const auto& t : tensors_) sq += t->grad.squaredNorm();
    return std::sqrt(sq);
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += static_cast<std::size_t>(t->value.size());
    return n;
  }

 private:
  std::vector<std::unique_ptr<Tensor>> tensors_;
};

// --------------------------------------------------------------------- tape

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t idx) : tape_(tape), idx_(idx) {}

  const Mat& value() const;
  const Mat& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }

  Tape* tape() const { return tape_; }
  std::size_t index() const { return idx_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t idx_ = 0;
};

class Tape {
 public:
  struct Node {
    Mat value;
    Mat grad;  // empty until touched during backward
    std::function<void(Tape&)> back;
  };

  Var push(Mat value, std::function<void(Tape&)> back = nullptr) {
    auto n = std::make_unique<Node>();
    n->value = std::move(value);
    n->back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  Node& node(std::size_t i) { return *nodes_[i]; }
  const Node& node(std::size_t i) const { return *nodes_[i]; }

  // Accumulate into a node's gradient, allocating on first touch.
  void add_grad(std::size_t i, const Mat& g) {
    Node& n = *nodes_[i];
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  bool has_grad(std::size_t i) const { return nodes_[i]->grad.size() != 0; }

  // Reverse sweep from `loss` (must be 1x1). Gradients flow into node grads
  // and, through param/embed leaves, into Tensor::grad.
  void backward(const Var& loss) {
    VQTTS_REQUIRE(loss.tape() == this, "loss var belongs to a different tape");
    Node& ln = *nodes_[loss.index()];
    VQTTS_REQUIRE(ln.value.size() == 1, "backward target must be scalar");
    ln.grad = Mat::Ones(1, 1);
    for (std::size_t i = loss.index() + 1; i-- > 0;) {
      Node& n = *nodes_[i];
      if (n.back && n.grad.size() != 0) n.back(*this);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<std::unique_ptr<Node>> nodes_;
};

inline const Mat& Var::value() const { return tape_->node(idx_).value; }
inline const Mat& Var::grad() const { return tape_->node(idx_).grad; }

// ---------------------------------------------------------------------- ops

inline Var constant(Tape& t, Mat m) { return t.push(std::move(m)); }

inline Var param(Tape& t, Tensor& p) {
  Tensor* pp = &p;
  Var v = t.push(p.value);
  const std::size_t i = v.index();
  t.node(i).back = [i, pp](Tape& tp) { pp->grad += tp.node(i).grad; };
  return v;
}

inline Var detach(const Var& a) {
  return a.tape()->push(a.value());
}

inline Var add(const Var& a, const Var& b) {
  Tape& t = *a.tape();
  Var v = t.push(a.value() + b.value());
  const std::size_t i = v.index(), ia = a.index(), ib = b.index();
  t.node(i).back = [i, ia, ib](Tape& tp) {
    tp.add_grad(ia, tp.node(i).grad);
    tp.add_grad(ib, tp.node(i).grad);
  };
  return v;
}

inline Var sub(const Var& a, const Var& b) {
  Tape& t = *a.tape();
  Var v = t.push(a.value() - b.value());
  const std::size_t i = v.index(), ia = a.index(), ib = b.index();
  t.node(i).back = [i, ia, ib](Tape& tp) {
    tp.add_grad(ia, tp.node(i).grad);
    tp.add_grad(ib, -tp.node(i).grad);
  };
  return v;
}

inline Var scale(const Var& a, double s) {
  Tape& t = *a.tape();
  Var v = t.push(a.value() * s);
  const std::size_t i = v.index(), ia = a.index();
  t.node(i).back = [i, ia, s](Tape& tp) { tp.add_grad(ia, s * tp.node(i).grad); };
  return v;
}

inline Var cmul(const Var& a, const Var& b) {
  Tape& t = *a.tape();
  Var v = t.push(a.value().cwiseProduct(b.value()));
  const std::size_t i = v.index(), ia = a.index(), ib = b.index();
  t.node(i).back = [i, ia, ib](Tape& tp) {
    tp.add_grad(ia, tp.node(i).grad.cwiseProduct(tp.node(ib).value));
    tp.add_grad(ib, tp.node(i).grad.cwiseProduct(tp.node(ia).value));
  };
  return v;
}

inline Var matmul(const Var& a, const Var& b) {
  Tape& t = *a.tape();
  VQTTS_REQUIRE(a.cols() == b.rows(), "matmul shape mismatch");
  Var v = t.push(a.value() * b.value());
  const std::size_t i = v.index(), ia = a.index(), ib = b.index();
  t.node(i).back = [i, ia, ib](Tape& tp) {
    tp.add_grad(ia, tp.node(i).grad * tp.node(ib).value.transpose());
    tp.add_grad(ib, tp.node(ia).value.transpose() * tp.node(i).grad);
  };
  return v;
}

// a' * b for a column-vector-shaped left operand (L x 1), b (L x H) -> 1 x H.
inline Var matmul_tn(const Var& a, const Var& b) {
  Tape& t = *a.tape();
  VQTTS_REQUIRE(a.rows() == b.rows(), "matmul_tn shape mismatch");
  Var v = t.push(a.value().transpose() * b.value());
  const std::size_t i = v.index(), ia = a.index(), ib = b.index();
  t.node(i).back = [i, ia, ib](Tape& tp) {
    tp.add_grad(ia, tp.node(ib).value * tp.node(i).grad.transpose());
    tp.add_grad(ib, tp.node(ia).value * tp.node(i).grad);
  };
  return v;
}

// a (T x C) + b (1 x C) broadcast over rows.
inline Var add_row_broadcast(const Var& a, const Var& b) {
  Tape& t = *a.tape();
  VQTTS_REQUIRE(b.rows() == 1 && a.cols() == b.cols(), "broadcast shape mismatch");
  Mat out = a.value();
  out.rowwise() += b.value().row(0);
  Var v = t.push(std::move(out));
  const std::size_t i = v.index(), ia = a.index(), ib = b.index();
  t.node(i).back = [i, ia, ib](Tape& tp) {
    tp.add_grad(ia, tp.node(i).grad);
    tp.add_grad(ib, tp.node(i).grad.colwise().sum());
  };
  return v;
}

inline Var tanh_(const Var& a) {
  Tape& t = *a.tape();
  Var v = t.push(a.value().array().tanh().matrix());
  const std::size_t i = v.index(), ia = a.index();
  t.node(i).back = [i, ia](Tape& tp) {
    const Mat& y = tp.node(i).value;
    tp.add_grad(ia, tp.node(i).grad.cwiseProduct((1.0 - y.array().square()).matrix()));
  };
  return v;
}

inline Var sigmoid_(const Var& a) {
  Tape& t = *a.tape();
  Var v = t.push((1.0 / (1.0 + (-a.value().array()).exp())).matrix());
  const std::size_t i = v.index(), ia = a.index();
  t.node(i).back = [i, ia](Tape& tp) {
    const Mat& y = tp.node(i).value;
    tp.add_grad(ia, tp.node(i).grad.cwiseProduct((y.array() * (1.0 - y.array())).matrix()));
  };
  return v;
}

inline Var relu_(const Var& a) {
  Tape& t = *a.tape();
  Var v = t.push(a.value().cwiseMax(0.0));
  const std::size_t i = v.index(), ia = a.index();
  t.node(i).back = [i, ia](Tape& tp) {
    const Mat mask = (tp.node(ia).value.array() > 0.0).cast<double>().matrix();
    tp.add_grad(ia, tp.node(i).grad.cwiseProduct(mask));
  };
  return v;
}

// Softmax over the rows of a column vector (L x 1).
inline Var softmax_vec(const Var& a) {
  Tape& t = *a.tape();
  VQTTS_REQUIRE(a.cols() == 1, "softmax_vec expects a column vector");
  Eigen::ArrayXd e = (a.value().col(0).array() - a.value().col(0).maxCoeff()).exp();
  Mat y = (e / e.sum()).matrix();
  Var v = t.push(std::move(y));
  const std::size_t i = v.index(), ia = a.index();
  t.node(i).back = [i, ia](Tape& tp) {
    const Mat& y_ = tp.node(i).value;
    const Mat& g = tp.node(i).grad;
    const double dot = (y_.array() * g.array()).sum();
    tp.add_grad(ia, (y_.array() * (g.array() - dot)).matrix());
  };
  return v;
}

inline Var sum(const Var& a) {
  Tape& t = *a.tape();
  Var v = t.push(Mat::Constant(1, 1, a.value().sum()));
  const std::size_t i = v.index(), ia = a.index();
  t.node(i).back = [i, ia](Tape& tp) {
    const double g = tp.node(i).grad(0, 0);
    tp.add_grad(ia, Mat::Constant(tp.node(ia).value.rows(), tp.node(ia).value.cols(), g));
  };
  return v;
}

// Mean of squared differences over all elements; b participates in the graph.
inline Var mse(const Var& a, const Var& b) {
  Tape& t = *a.tape();
  VQTTS_REQUIRE(a.rows() == b.rows() && a.cols() == b.cols(), "mse shape mismatch");
  const double n = static_cast<double>(a.value().size());
  Var v = t.push(Mat::Constant(1, 1, (a.value() - b.value()).squaredNorm() / n));
  const std::size_t i = v.index(), ia = a.index(), ib = b.index();
  t.node(i).back = [i, ia, ib, n](Tape& tp) {
    const double g = tp.node(i).grad(0, 0);
    const Mat d = (2.0 * g / n) * (tp.node(ia).value - tp.node(ib).value);
    tp.add_grad(ia, d);
    tp.add_grad(ib, -d);
  };
  return v;
}

inline Var mse(const Var& a, const Mat& target) {
  return mse(a, constant(*a.tape(), target));
}

// Mean binary cross-entropy on logits with positive-class weighting.
inline Var bce_logits(const Var& logits, const Mat& targets, double pos_weight) {
  Tape& t = *logits.tape();
  VQTTS_REQUIRE(logits.rows() == targets.rows() && logits.cols() == targets.cols(),
                "bce shape mismatch");
  const double n = static_cast<double>(targets.size());
  const auto x = logits.value().array();
  const auto y = targets.array();
  // softplus(x) computed stably as max(x,0) + log1p(exp(-|x|))
  const Eigen::ArrayXXd sp_pos = x.max(0.0) + (-x.abs()).exp().log1p();
  const Eigen::ArrayXXd sp_neg = (-x).max(0.0) + (-x.abs()).exp().log1p();
  const double loss = ((pos_weight * y * sp_neg) + ((1.0 - y) * sp_pos)).sum() / n;
  Var v = t.push(Mat::Constant(1, 1, loss));
  const std::size_t i = v.index(), ix = logits.index();
  Mat targ = targets;
  t.node(i).back = [i, ix, targ, pos_weight, n](Tape& tp) {
    const double g = tp.node(i).grad(0, 0);
    const Eigen::ArrayXXd sig = 1.0 / (1.0 + (-tp.node(ix).value.array()).exp());
    const Eigen::ArrayXXd d =
        (pos_weight * targ.array() * (sig - 1.0) + (1.0 - targ.array()) * sig) * (g / n);
    tp.add_grad(ix, d.matrix());
  };
  return v;
}

inline Var concat_cols(const Var& a, const Var& b) {
  Tape& t = *a.tape();
  VQTTS_REQUIRE(a.rows() == b.rows(), "concat_cols row mismatch");
  Mat out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  Var v = t.push(std::move(out));
  const std::size_t i = v.index(), ia = a.index(), ib = b.index();
  const Eigen::Index ca = a.cols(), cb = b.cols();
  t.node(i).back = [i, ia, ib, ca, cb](Tape& tp) {
    const Mat& g = tp.node(i).grad;
    tp.add_grad(ia, g.leftCols(ca));
    tp.add_grad(ib, g.rightCols(cb));
  };
  return v;
}

inline Var concat_rows(Tape& t, const std::vector<Var>& parts) {
  VQTTS_REQUIRE(!parts.empty(), "concat_rows needs at least one part");
  Eigen::Index rows = 0;
  for (const auto& p : parts) rows += p.rows();
  Mat out(rows, parts[0].cols());
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  Var v = t.push(std::move(out));
  const std::size_t i = v.index();
  std::vector<std::pair<std::size_t, Eigen::Index>> spans;
  spans.reserve(parts.size());
  for (const auto& p : parts) spans.emplace_back(p.index(), p.rows());
  t.node(i).back = [i, spans](Tape& tp) {
    const Mat& g = tp.node(i).grad;
    Eigen::Index r_ = 0;
    for (const auto& [idx, n] : spans) {
      tp.add_grad(idx, g.middleRows(r_, n));
      r_ += n;
    }
  };
  return v;
}

inline Var rows(const Var& a, Eigen::Index r0, Eigen::Index n) {
  Tape& t = *a.tape();
  VQTTS_REQUIRE(r0 >= 0 && r0 + n <= a.rows(), "rows slice out of range");
  Var v = t.push(a.value().middleRows(r0, n));
  const std::size_t i = v.index(), ia = a.index();
  t.node(i).back = [i, ia, r0, n](Tape& tp) {
    Mat g = Mat::Zero(tp.node(ia).value.rows(), tp.node(ia).value.cols());
    g.middleRows(r0, n) = tp.node(i).grad;
    tp.add_grad(ia, g);
  };
  return v;
}

// Row-major reinterpretation to (rows x cols).
inline Var reshape(const Var& a, Eigen::Index rows_, Eigen::Index cols_) {
  Tape& t = *a.tape();
  VQTTS_REQUIRE(a.rows() * a.cols() == rows_ * cols_, "reshape element count mismatch");
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor rm = a.value();
  Mat out = Eigen::Map<RowMajor>(rm.data(), rows_, cols_);
  Var v = t.push(std::move(out));
  const std::size_t i = v.index(), ia = a.index();
  const Eigen::Index ar = a.rows(), ac = a.cols();
  t.node(i).back = [i, ia, ar, ac](Tape& tp) {
    RowMajor gm = tp.node(i).grad;
    Mat g = Eigen::Map<RowMajor>(gm.data(), ar, ac);
    tp.add_grad(ia, g);
  };
  return v;
}

// Gather rows of a parameter table; gradients scatter back into the table.
inline Var embed(Tape& t, Tensor& table, const std::vector<int>& ids) {
  Mat out(static_cast<Eigen::Index>(ids.size()), table.value.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    VQTTS_REQUIRE(ids[r] >= 0 && ids[r] < table.value.rows(),
                  "embedding id out of range in " + table.name);
    out.row(static_cast<Eigen::Index>(r)) = table.value.row(ids[r]);
  }
  Var v = t.push(std::move(out));
  const std::size_t i = v.index();
  Tensor* tp_ = &table;
  std::vector<int> ids_ = ids;
  t.node(i).back = [i, tp_, ids_](Tape& tp) {
    const Mat& g = tp.node(i).grad;
    for (std::size_t r = 0; r < ids_.size(); ++r)
      tp_->grad.row(ids_[r]) += g.row(static_cast<Eigen::Index>(r));
  };
  return v;
}

// Rearrange rows by index (duplicates allowed); gradients scatter-add back.
inline Var gather_rows(const Var& a, const std::vector<int>& idx) {
  Tape& t = *a.tape();
  Mat out(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    VQTTS_REQUIRE(idx[r] >= 0 && idx[r] < a.rows(), "gather_rows index out of range");
    out.row(static_cast<Eigen::Index>(r)) = a.value().row(idx[r]);
  }
  Var v = t.push(std::move(out));
  const std::size_t i = v.index(), ia = a.index();
  std::vector<int> idx_ = idx;
  t.node(i).back = [i, ia, idx_](Tape& tp) {
    Mat g = Mat::Zero(tp.node(ia).value.rows(), tp.node(ia).value.cols());
    const Mat& gi = tp.node(i).grad;
    for (std::size_t r = 0; r < idx_.size(); ++r)
      g.row(idx_[r]) += gi.row(static_cast<Eigen::Index>(r));
    tp.add_grad(ia, g);
  };
  return v;
}

// Nearest-neighbor upsampling along time.
inline Var repeat_rows(const Var& a, int factor) {
  std::vector<int> idx;
  idx.reserve(static_cast<std::size_t>(a.rows()) * static_cast<std::size_t>(factor));
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (int k = 0; k < factor; ++k) idx.push_back(static_cast<int>(r));
  return gather_rows(a, idx);
}

// Quantizer bridge: forward takes the value `q`, backward copies the
// incoming gradient to `z` unchanged (q receives nothing).
inline Var straight_through(const Var& z, const Mat& q) {
  Tape& t = *z.tape();
  VQTTS_REQUIRE(z.rows() == q.rows() && z.cols() == q.cols(),
                "straight_through shape mismatch");
  Var v = t.push(q);
  const std::size_t i = v.index(), iz = z.index();
  t.node(i).back = [i, iz](Tape& tp) { tp.add_grad(iz, tp.node(i).grad); };
  return v;
}

// Unfold a (T x C) sequence into (T_out x K*C) patches for 1-d convolution,
// zero-padded at the borders ("same" for stride 1, ceil(T/stride) otherwise).
inline Var im2col(const Var& x, int kernel, int stride) {
  Tape& t = *x.tape();
  VQTTS_REQUIRE(kernel >= 1 && stride >= 1, "bad conv geometry");
  const Eigen::Index T = x.rows(), C = x.cols();
  const Eigen::Index t_out = (T + stride - 1) / stride;
  const int left = (kernel - 1) / 2;
  Mat out = Mat::Zero(t_out, static_cast<Eigen::Index>(kernel) * C);
  for (Eigen::Index r = 0; r < t_out; ++r)
    for (int j = 0; j < kernel; ++j) {
      const Eigen::Index src = r * stride - left + j;
      if (src >= 0 && src < T) out.block(r, static_cast<Eigen::Index>(j) * C, 1, C) = x.value().row(src);
    }
  Var v = t.push(std::move(out));
  const std::size_t i = v.index(), ix = x.index();
  t.node(i).back = [i, ix, T, C, kernel, stride, left](Tape& tp) {
    const Mat& g = tp.node(i).grad;
    Mat gx = Mat::Zero(T, C);
    for (Eigen::Index r = 0; r < g.rows(); ++r)
      for (int j = 0; j < kernel; ++j) {
        const Eigen::Index src = r * stride - left + j;
        if (src >= 0 && src < T)
          gx.row(src) += g.block(r, static_cast<Eigen::Index>(j) * C, 1, C);
      }
    tp.add_grad(ix, gx);
  };
  return v;
}

// x: T x Cin, w: (K*Cin) x Cout, b: 1 x Cout -> ceil(T/stride) x Cout.
inline Var conv1d(const Var& x, const Var& w, const Var& b, int kernel, int stride = 1) {
  return add_row_broadcast(matmul(im2col(x, kernel, stride), w), b);
}

inline Var affine(const Var& x, const Var& w, const Var& b) {
  return add_row_broadcast(matmul(x, w), b);
}

// --------------------------------------------------------------------- adam

class Adam {
 public:
  explicit Adam(double lr, double clip_norm = 1.0)
      : lr_(lr), clip_norm_(clip_norm) {}

  void step(ParamStore& params) {
    ++t_;
    if (clip_norm_ > 0.0) {
      const double norm = params.grad_norm();
      if (norm > clip_norm_) {
        const double s = clip_norm_ / norm;
        for (auto& p : params.tensors()) p->grad *= s;
      }
    }
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& p : params.tensors()) {
      p->adam_m = beta1_ * p->adam_m + (1.0 - beta1_) * p->grad;
      p->adam_v = beta2_ * p->adam_v + (1.0 - beta2_) * p->grad.cwiseProduct(p->grad);
      const Mat mhat = p->adam_m / bc1;
      const Mat vhat = p->adam_v / bc2;
      p->value -= lr_ * (mhat.array() / (vhat.array().sqrt() + eps_)).matrix();
    }
    params.zero_grad();
  }

  long step_count() const { return t_; }
  void set_step_count(long t) { t_ = t; }
  double lr() const { return lr_; }

 private:
  double lr_;
  double clip_norm_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
};

// --------------------------------------------------------- checkpoint glue

inline void params_to_checkpoint(const ParamStore& params, Checkpoint& ck,
                                 bool with_adam = true) {
  for (const auto& p : params.tensors()) {
    ck.tensors[p->name] = p->value;
    if (with_adam) {
      ck.tensors[p->name + ".adam_m"] = p->adam_m;
      ck.tensors[p->name + ".adam_v"] = p->adam_v;
    }
  }
}

inline void params_from_checkpoint(ParamStore& params, const Checkpoint& ck) {
  for (auto& p : params.tensors()) {
    auto it = ck.tensors.find(p->name);
    if (it == ck.tensors.end()) throw IoError("checkpoint misses tensor " + p->name);
    VQTTS_REQUIRE(it->second.rows() == p->value.rows() && it->second.cols() == p->value.cols(),
                  "checkpoint tensor shape mismatch for " + p->name);
    p->value = it->second;
    auto im = ck.tensors.find(p->name + ".adam_m");
    auto iv = ck.tensors.find(p->name + ".adam_v");
    if (im != ck.tensors.end()) p->adam_m = im->second;
    if (iv != ck.tensors.end()) p->adam_v = iv->second;
  }
}

}  // namespace vqtts::ad
