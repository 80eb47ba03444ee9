#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "catvrnn/errors.hpp"
#include "catvrnn/numeric.hpp"
#include "catvrnn/tensor.hpp"

namespace catvrnn {

template <typename Scalar>
class Tape;

/// Handle to a value recorded on a Tape.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix<Scalar>& value() const { return tape_->value(id_); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Scalar scalar() const { return value()(0, 0); }

  Tape<Scalar>* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recording of one forward pass.
///
/// Values are kept for the lifetime of the tape. Each differentiable node
/// carries a closure that receives the node's upstream gradient and pushes
/// contributions into its inputs (other nodes or parameter tensors). With
/// `record == false` no closures are stored and backward() is unavailable.
template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;
  using BackwardFn = std::function<void(Tape&, const Mat&)>;

  explicit Tape(bool record = true) : record_(record) { nodes_.reserve(256); }

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var<Scalar> constant(Mat value) {
    nodes_.push_back(Node{std::move(value), Mat(), BackwardFn(), false});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  Var<Scalar> push(Mat value, BackwardFn fn, bool requires_grad = true) {
    const bool keep = record_ && requires_grad;
    nodes_.push_back(Node{std::move(value), Mat(), keep ? std::move(fn) : BackwardFn(), keep});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  const Mat& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  template <typename Derived>
  void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  template <typename Derived>
  void accumulate_param(Tensor<Scalar>& t, const Eigen::MatrixBase<Derived>& g) {
    if (!t.trainable) return;
    if (!t.has_grad()) t.grad = Mat::Zero(t.value.rows(), t.value.cols());
    t.grad += g;
  }

  /// Propagates d(out)/d(.) into every parameter tensor reached by `out`.
  void backward(const Var<Scalar>& out) {
    if (!record_) throw ConfigError("backward() on a tape that was not recording");
    if (out.tape() != this) throw ConfigError("backward(): variable belongs to another tape");
    if (out.value().size() != 1) throw ConfigError("backward(): output must be a scalar");
    accumulate(out.id(), Mat::Constant(1, 1, Scalar(1)));
    for (std::size_t i = out.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.size() == 0) continue;
      n.backward(*this, n.grad);
    }
  }

  /// Debug switch that perturbs dense-layer weight gradients by 10%.
  void set_corrupt_backward(bool on) { corrupt_ = on; }
  bool corrupt_backward() const { return corrupt_; }

  std::size_t size() const { return nodes_.size(); }

  /// When enabled, piecewise ops (relu, max) hash their branch decisions so
  /// two forward passes can tell whether they took the same linear piece.
  void set_track_branches(bool on) { track_branches_ = on; }
  bool tracking_branches() const { return track_branches_; }
  void note_branch(std::uint64_t v) { branch_hash_ = (branch_hash_ ^ v) * 1099511628211ULL; }
  std::uint64_t branch_signature() const { return branch_hash_; }

 private:
  struct Node {
    Mat value;
    Mat grad;
    BackwardFn backward;
    bool requires_grad;
  };

  std::vector<Node> nodes_;
  bool record_;
  bool corrupt_ = false;
  bool track_branches_ = false;
  std::uint64_t branch_hash_ = 14695981039346656037ULL;
};

namespace detail {

template <typename Scalar>
Tape<Scalar>& same_tape(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.tape() != b.tape()) throw ConfigError("variables recorded on different tapes");
  return *a.tape();
}

template <typename Scalar>
void require_same_shape(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()) + ")");
  }
}

template <typename Scalar>
bool any_requires(const Var<Scalar>& a) {
  return a.tape()->requires_grad(a.id());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& tape = detail::same_tape(a, b);
  detail::require_same_shape(a, b, "add");
  const std::size_t ia = a.id(), ib = b.id();
  return tape.push(
      a.value() + b.value(),
      [ia, ib](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        t.accumulate(ia, g);
        t.accumulate(ib, g);
      },
      detail::any_requires(a) || detail::any_requires(b));
}

template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& tape = detail::same_tape(a, b);
  detail::require_same_shape(a, b, "sub");
  const std::size_t ia = a.id(), ib = b.id();
  return tape.push(
      a.value() - b.value(),
      [ia, ib](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        t.accumulate(ia, g);
        t.accumulate(ib, -g);
      },
      detail::any_requires(a) || detail::any_requires(b));
}

/// Elementwise (Hadamard) product.
template <typename Scalar>
Var<Scalar> operator*(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& tape = detail::same_tape(a, b);
  detail::require_same_shape(a, b, "mul");
  const std::size_t ia = a.id(), ib = b.id();
  return tape.push(
      (a.value().array() * b.value().array()).matrix(),
      [ia, ib](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        t.accumulate(ia, (g.array() * t.value(ib).array()).matrix());
        t.accumulate(ib, (g.array() * t.value(ia).array()).matrix());
      },
      detail::any_requires(a) || detail::any_requires(b));
}

template <typename Scalar>
Var<Scalar> operator*(const Var<Scalar>& a, Scalar s) {
  const std::size_t ia = a.id();
  return a.tape()->push(
      a.value() * s,
      [ia, s](Tape<Scalar>& t, const Matrix<Scalar>& g) { t.accumulate(ia, g * s); },
      detail::any_requires(a));
}

/// s - a, elementwise.
template <typename Scalar>
Var<Scalar> operator-(Scalar s, const Var<Scalar>& a) {
  const std::size_t ia = a.id();
  return a.tape()->push(
      (s - a.value().array()).matrix(),
      [ia](Tape<Scalar>& t, const Matrix<Scalar>& g) { t.accumulate(ia, -g); },
      detail::any_requires(a));
}

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, Scalar s) {
  const std::size_t ia = a.id();
  return a.tape()->push(
      (a.value().array() + s).matrix(),
      [ia](Tape<Scalar>& t, const Matrix<Scalar>& g) { t.accumulate(ia, g); },
      detail::any_requires(a));
}

// ---------------------------------------------------------------------------
// Activations

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x) {
  const std::size_t ix = x.id();
  if (x.tape()->tracking_branches()) {
    for (Index i = 0; i < x.value().size(); ++i) x.tape()->note_branch(x.value().data()[i] > Scalar(0));
  }
  return x.tape()->push(
      x.value().cwiseMax(Scalar(0)),
      [ix](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        t.accumulate(ix, (t.value(ix).array() > Scalar(0)).select(g, Scalar(0)).matrix());
      },
      detail::any_requires(x));
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& x) {
  const std::size_t ix = x.id();
  const std::size_t iy = x.tape()->size();
  return x.tape()->push(
      (Scalar(1) / (Scalar(1) + (-x.value().array()).exp())).matrix(),
      [ix, iy](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        const auto& y = t.value(iy).array();
        t.accumulate(ix, (g.array() * y * (Scalar(1) - y)).matrix());
      },
      detail::any_requires(x));
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& x) {
  const std::size_t ix = x.id();
  const std::size_t iy = x.tape()->size();
  return x.tape()->push(
      x.value().array().tanh().matrix(),
      [ix, iy](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        const auto& y = t.value(iy).array();
        t.accumulate(ix, (g.array() * (Scalar(1) - y * y)).matrix());
      },
      detail::any_requires(x));
}

/// log(1 + exp(x)), evaluated as max(x, 0) + log1p(exp(-|x|)).
template <typename Scalar>
Var<Scalar> softplus(const Var<Scalar>& x) {
  const std::size_t ix = x.id();
  const auto& v = x.value().array();
  Matrix<Scalar> y = (v.max(Scalar(0)) + (-v.abs()).exp().log1p()).matrix();
  return x.tape()->push(
      std::move(y),
      [ix](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        const auto& v = t.value(ix).array();
        t.accumulate(ix, (g.array() / (Scalar(1) + (-v).exp())).matrix());
      },
      detail::any_requires(x));
}

// ---------------------------------------------------------------------------
// Parameters and layout

/// Dense layer y = x W^T + b with W stored as (out x in).
template <typename Scalar>
Var<Scalar> linear(const Var<Scalar>& x, Tensor<Scalar>& weight, Tensor<Scalar>* bias) {
  if (x.cols() != weight.value.cols()) {
    throw ConfigError("linear '" + weight.name + "': input width " + std::to_string(x.cols()) +
                      " does not match weight input width " +
                      std::to_string(weight.value.cols()));
  }
  Matrix<Scalar> y = x.value() * weight.value.transpose();
  if (bias) {
    if (bias->value.cols() != weight.value.rows()) {
      throw ConfigError("linear '" + weight.name + "': bias width mismatch");
    }
    y.rowwise() += bias->value.row(0);
  }
  const std::size_t ix = x.id();
  Tensor<Scalar>* w = &weight;
  return x.tape()->push(std::move(y), [ix, w, bias](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    if (t.requires_grad(ix)) t.accumulate(ix, g * w->value);
    if (t.corrupt_backward()) {
      t.accumulate_param(*w, Scalar(1.1) * (g.transpose() * t.value(ix)));
    } else {
      t.accumulate_param(*w, g.transpose() * t.value(ix));
    }
    if (bias) t.accumulate_param(*bias, g.colwise().sum());
  });
}

template <typename Scalar>
Var<Scalar> linear(const Var<Scalar>& x, Tensor<Scalar>& weight, Tensor<Scalar>& bias) {
  return linear(x, weight, &bias);
}

/// Gathers rows `ids` of an embedding table.
template <typename Scalar>
Var<Scalar> embedding(Tape<Scalar>& tape, Tensor<Scalar>& table, const std::vector<int>& ids) {
  const Index vocab = table.value.rows();
  Matrix<Scalar> y(static_cast<Index>(ids.size()), table.value.cols());
  for (std::size_t b = 0; b < ids.size(); ++b) {
    if (ids[b] < 0 || ids[b] >= vocab) {
      throw InvariantError("token id " + std::to_string(ids[b]) + " out of range [0, " +
                           std::to_string(vocab) + ")");
    }
    y.row(static_cast<Index>(b)) = table.value.row(ids[b]);
  }
  Tensor<Scalar>* tbl = &table;
  return tape.push(std::move(y), [tbl, ids](Tape<Scalar>&, const Matrix<Scalar>& g) {
    if (!tbl->trainable) return;
    if (!tbl->has_grad()) tbl->grad = Matrix<Scalar>::Zero(tbl->value.rows(), tbl->value.cols());
    for (std::size_t b = 0; b < ids.size(); ++b) {
      tbl->grad.row(ids[b]) += g.row(static_cast<Index>(b));
    }
  });
}

/// A parameter tensor as a tape value.
template <typename Scalar>
Var<Scalar> param(Tape<Scalar>& tape, Tensor<Scalar>& p) {
  Tensor<Scalar>* ptr = &p;
  return tape.push(p.value, [ptr](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate_param(*ptr, g);
  });
}

/// Repeats a single-row value `n` times.
template <typename Scalar>
Var<Scalar> broadcast_rows(const Var<Scalar>& row, Index n) {
  if (row.rows() != 1) throw ConfigError("broadcast_rows: input must have one row");
  const std::size_t ir = row.id();
  return row.tape()->push(
      row.value().replicate(n, 1),
      [ir](Tape<Scalar>& t, const Matrix<Scalar>& g) { t.accumulate(ir, g.colwise().sum()); },
      detail::any_requires(row));
}

/// Multiplies row b of `x` by the constant coeff[b].
template <typename Scalar>
Var<Scalar> scale_rows(const Var<Scalar>& x, const std::vector<Scalar>& coeff) {
  if (static_cast<Index>(coeff.size()) != x.rows()) {
    throw ConfigError("scale_rows: coefficient count mismatch");
  }
  const Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> c(coeff.data(),
                                                                     static_cast<Index>(coeff.size()));
  const std::size_t ix = x.id();
  return x.tape()->push(
      (c.asDiagonal() * x.value()),
      [ix, coeff](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        const Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> c(
            coeff.data(), static_cast<Index>(coeff.size()));
        t.accumulate(ix, c.asDiagonal() * g);
      },
      detail::any_requires(x));
}

template <typename Scalar>
Var<Scalar> concat_cols(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& tape = detail::same_tape(a, b);
  if (a.rows() != b.rows()) throw ConfigError("concat_cols: row count mismatch");
  Matrix<Scalar> y(a.rows(), a.cols() + b.cols());
  y << a.value(), b.value();
  const std::size_t ia = a.id(), ib = b.id();
  const Index ca = a.cols(), cb = b.cols();
  return tape.push(
      std::move(y),
      [ia, ib, ca, cb](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        t.accumulate(ia, g.leftCols(ca));
        t.accumulate(ib, g.rightCols(cb));
      },
      detail::any_requires(a) || detail::any_requires(b));
}

template <typename Scalar>
Var<Scalar> slice_cols(const Var<Scalar>& x, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > x.cols()) {
    throw ConfigError("slice_cols: range out of bounds");
  }
  const std::size_t ix = x.id();
  const Index rows = x.rows(), cols = x.cols();
  return x.tape()->push(
      x.value().middleCols(start, count),
      [ix, start, count, rows, cols](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        Matrix<Scalar> full = Matrix<Scalar>::Zero(rows, cols);
        full.middleCols(start, count) = g;
        t.accumulate(ix, full);
      },
      detail::any_requires(x));
}

// ---------------------------------------------------------------------------
// Reductions and losses

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& x) {
  const std::size_t ix = x.id();
  const Index rows = x.rows(), cols = x.cols();
  return x.tape()->push(
      Matrix<Scalar>::Constant(1, 1, x.value().sum()),
      [ix, rows, cols](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        t.accumulate(ix, Matrix<Scalar>::Constant(rows, cols, g(0, 0)));
      },
      detail::any_requires(x));
}

/// Row-wise log-softmax.
template <typename Scalar>
Var<Scalar> log_softmax_rows(const Var<Scalar>& x) {
  Matrix<Scalar> y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) y.row(r) = log_softmax(x.value().row(r));
  const std::size_t ix = x.id();
  const std::size_t iy = x.tape()->size();
  return x.tape()->push(
      std::move(y),
      [ix, iy](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        const Matrix<Scalar> p = t.value(iy).array().exp().matrix();
        Matrix<Scalar> dx = g - (p.array().colwise() * g.rowwise().sum().array()).matrix();
        t.accumulate(ix, dx);
      },
      detail::any_requires(x));
}

/// Per-row -log softmax(x_b)[target_b] * weight_b, as a (rows x 1) column.
template <typename Scalar>
Var<Scalar> cross_entropy_rows(const Var<Scalar>& logits, const std::vector<int>& targets,
                               const std::vector<Scalar>& weights = {}) {
  const Index rows = logits.rows();
  if (static_cast<Index>(targets.size()) != rows) {
    throw ConfigError("cross_entropy_rows: target count mismatch");
  }
  if (!weights.empty() && static_cast<Index>(weights.size()) != rows) {
    throw ConfigError("cross_entropy_rows: weight count mismatch");
  }
  Matrix<Scalar> loss(rows, 1);
  for (Index r = 0; r < rows; ++r) {
    const Scalar w = weights.empty() ? Scalar(1) : weights[r];
    loss(r, 0) = w == Scalar(0) ? Scalar(0)
                                : w * cross_entropy_from_logits(logits.value().row(r), targets[r]);
  }
  const std::size_t il = logits.id();
  return logits.tape()->push(
      std::move(loss),
      [il, targets, weights](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        const auto& x = t.value(il);
        Matrix<Scalar> dx(x.rows(), x.cols());
        for (Index r = 0; r < x.rows(); ++r) {
          const Scalar w = (weights.empty() ? Scalar(1) : weights[r]) * g(r, 0);
          if (w == Scalar(0)) {
            dx.row(r).setZero();
            continue;
          }
          dx.row(r) = softmax(x.row(r)) * w;
          dx(r, targets[r]) -= w;
        }
        t.accumulate(il, dx);
      },
      detail::any_requires(logits));
}

/// Column of x[b, index_b].
template <typename Scalar>
Var<Scalar> pick(const Var<Scalar>& x, const std::vector<int>& index) {
  if (static_cast<Index>(index.size()) != x.rows()) throw ConfigError("pick: index count mismatch");
  Matrix<Scalar> y(x.rows(), 1);
  for (Index r = 0; r < x.rows(); ++r) {
    if (index[r] < 0 || index[r] >= x.cols()) throw InvariantError("pick: index out of range");
    y(r, 0) = x.value()(r, index[r]);
  }
  const std::size_t ix = x.id();
  const Index rows = x.rows(), cols = x.cols();
  return x.tape()->push(
      std::move(y),
      [ix, index, rows, cols](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        Matrix<Scalar> dx = Matrix<Scalar>::Zero(rows, cols);
        for (Index r = 0; r < rows; ++r) dx(r, index[r]) = g(r, 0);
        t.accumulate(ix, dx);
      },
      detail::any_requires(x));
}

/// Row-wise KL(N(mq, sq^2) || N(mp, sp^2)) for diagonal Gaussians, (rows x 1).
template <typename Scalar>
Var<Scalar> kl_diag_gaussian(const Var<Scalar>& mq, const Var<Scalar>& sq, const Var<Scalar>& mp,
                             const Var<Scalar>& sp) {
  detail::require_same_shape(mq, sq, "kl");
  detail::require_same_shape(mq, mp, "kl");
  detail::require_same_shape(mq, sp, "kl");
  if (!(sq.value().array() > Scalar(0)).all() || !(sp.value().array() > Scalar(0)).all()) {
    throw InvariantError("kl_diag_gaussian: sigma must be strictly positive");
  }
  const auto d = (mq.value() - mp.value()).array();
  const auto vq = sq.value().array().square();
  const auto vp = sp.value().array().square();
  Matrix<Scalar> kl = ((sp.value().array() / sq.value().array()).log() +
                       (vq + d.square()) / (Scalar(2) * vp) - Scalar(0.5))
                          .rowwise()
                          .sum()
                          .matrix();
  const std::size_t a = mq.id(), b = sq.id(), c = mp.id(), e = sp.id();
  return mq.tape()->push(
      std::move(kl),
      [a, b, c, e](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        const auto diff = (t.value(a) - t.value(c)).array();
        const auto s_q = t.value(b).array();
        const auto s_p = t.value(e).array();
        const auto vp = s_p.square();
        const auto gb = g.col(0).array();
        Matrix<Scalar> dmu = (diff / vp).colwise() * gb;
        t.accumulate(a, dmu);
        t.accumulate(c, -dmu);
        t.accumulate(b, ((-1 / s_q + s_q / vp).colwise() * gb).matrix());
        t.accumulate(e, ((1 / s_p - (s_q.square() + diff.square()) / (vp * s_p)).colwise() * gb)
                            .matrix());
      },
      detail::any_requires(mq) || detail::any_requires(sq) || detail::any_requires(mp) ||
          detail::any_requires(sp));
}

// ---------------------------------------------------------------------------
// Sequence helpers for the convolutional classifier

/// Input holds `batch` blocks of `length` rows each. Output row (b, i) is the
/// concatenation of input rows b*length+i .. b*length+i+width-1.
template <typename Scalar>
Var<Scalar> unfold_windows(const Var<Scalar>& x, Index batch, Index length, Index width) {
  if (x.rows() != batch * length) throw ConfigError("unfold_windows: row count mismatch");
  if (width < 1 || width > length) throw ConfigError("unfold_windows: bad window width");
  const Index dim = x.cols();
  const Index positions = length - width + 1;
  Matrix<Scalar> y(batch * positions, width * dim);
  for (Index b = 0; b < batch; ++b) {
    for (Index i = 0; i < positions; ++i) {
      for (Index k = 0; k < width; ++k) {
        y.block(b * positions + i, k * dim, 1, dim) = x.value().row(b * length + i + k);
      }
    }
  }
  const std::size_t ix = x.id();
  return x.tape()->push(
      std::move(y),
      [ix, batch, length, width, dim, positions](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        Matrix<Scalar> dx = Matrix<Scalar>::Zero(batch * length, dim);
        for (Index b = 0; b < batch; ++b) {
          for (Index i = 0; i < positions; ++i) {
            for (Index k = 0; k < width; ++k) {
              dx.row(b * length + i + k) += g.block(b * positions + i, k * dim, 1, dim);
            }
          }
        }
        t.accumulate(ix, dx);
      },
      detail::any_requires(x));
}

/// Max over consecutive groups of `group` rows, per column.
template <typename Scalar>
Var<Scalar> group_max(const Var<Scalar>& x, Index group) {
  if (group < 1 || x.rows() % group != 0) throw ConfigError("group_max: bad group size");
  const Index groups = x.rows() / group;
  const Index cols = x.cols();
  Matrix<Scalar> y(groups, cols);
  std::vector<Index> arg(static_cast<std::size_t>(groups * cols));
  for (Index b = 0; b < groups; ++b) {
    for (Index c = 0; c < cols; ++c) {
      Index best = b * group;
      for (Index r = b * group + 1; r < (b + 1) * group; ++r) {
        if (x.value()(r, c) > x.value()(best, c)) best = r;
      }
      y(b, c) = x.value()(best, c);
      if (x.tape()->tracking_branches()) x.tape()->note_branch(static_cast<std::uint64_t>(best));
      arg[static_cast<std::size_t>(b * cols + c)] = best;
    }
  }
  const std::size_t ix = x.id();
  const Index rows = x.rows();
  return x.tape()->push(
      std::move(y),
      [ix, arg = std::move(arg), rows, cols, groups](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        Matrix<Scalar> dx = Matrix<Scalar>::Zero(rows, cols);
        for (Index b = 0; b < groups; ++b) {
          for (Index c = 0; c < cols; ++c) dx(arg[static_cast<std::size_t>(b * cols + c)], c) += g(b, c);
        }
        t.accumulate(ix, dx);
      },
      detail::any_requires(x));
}

}  // namespace catvrnn
