#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairsample/rng.hpp"

namespace fairsample {

namespace detail {
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}
}  // namespace detail

/// Row-major dense matrix of finite doubles. The only tensor shape the
/// engine needs; vectors are 1xN or Nx1.
class DenseTensor {
 public:
  DenseTensor() = default;
  DenseTensor(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    detail::require(rows >= 0 && cols >= 0, "DenseTensor: negative shape");
  }

  static DenseTensor from_rows(const std::vector<std::vector<double>>& rows) {
    detail::require(!rows.empty(), "DenseTensor::from_rows: empty input");
    DenseTensor out(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      detail::require(rows[i].size() == rows[0].size(), "DenseTensor::from_rows: ragged rows");
      for (std::size_t j = 0; j < rows[i].size(); ++j) out.at(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    }
    return out;
  }

  static DenseTensor row_vector(const std::vector<double>& v) {
    DenseTensor out(1, static_cast<int>(v.size()));
    std::copy(v.begin(), v.end(), out.data_.begin());
    return out;
  }

  static DenseTensor identity(int n) {
    DenseTensor out(n, n);
    for (int i = 0; i < n; ++i) out.at(i, i) = 1.0;
    return out;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const std::vector<double>& values() const { return data_; }

  bool same_shape(const DenseTensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  double scalar() const {
    detail::require(rows_ == 1 && cols_ == 1, "DenseTensor::scalar: tensor is not 1x1");
    return data_[0];
  }

  std::vector<double> row(int r) const {
    return std::vector<double>(data_.begin() + static_cast<std::size_t>(r) * cols_,
                               data_.begin() + static_cast<std::size_t>(r + 1) * cols_);
  }

  bool operator==(const DenseTensor& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Plain (untaped) matrix math, used by evaluation paths and optimizers.

inline DenseTensor matmul(const DenseTensor& a, const DenseTensor& b) {
  detail::require(a.cols() == b.rows(), "matmul: inner dimensions disagree (" +
                                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + ")");
  DenseTensor c(a.rows(), b.cols());
  const int n = a.rows(), k = a.cols(), m = b.cols();
  for (int i = 0; i < n; ++i) {
    const double* arow = a.data() + static_cast<std::size_t>(i) * k;
    double* crow = c.data() + static_cast<std::size_t>(i) * m;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.data() + static_cast<std::size_t>(p) * m;
      for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

inline DenseTensor transpose(const DenseTensor& a) {
  DenseTensor t(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
  return t;
}

inline DenseTensor add(const DenseTensor& a, const DenseTensor& b) {
  detail::require(a.same_shape(b), "add: shape mismatch");
  DenseTensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
  return c;
}

inline DenseTensor scale(const DenseTensor& a, double c) {
  DenseTensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  return out;
}

inline DenseTensor relu(const DenseTensor& a) {
  DenseTensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  return out;
}

// Row-wise softmax with max subtraction.
inline DenseTensor softmax_rows(const DenseTensor& a) {
  DenseTensor out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i) {
    double mx = a.at(i, 0);
    for (int j = 1; j < a.cols(); ++j) mx = std::max(mx, a.at(i, j));
    double z = 0.0;
    for (int j = 0; j < a.cols(); ++j) {
      out.at(i, j) = std::exp(a.at(i, j) - mx);
      z += out.at(i, j);
    }
    for (int j = 0; j < a.cols(); ++j) out.at(i, j) /= z;
  }
  return out;
}

inline double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline DenseTensor glorot_init(int rows, int cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  DenseTensor w(rows, cols);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-limit, limit);
  return w;
}

// ---------------------------------------------------------------------------
// GradTape: eager reverse-mode tape over DenseTensor primitives.
//
// Forward values are computed when an op is recorded; backward() replays the
// record once in reverse and accumulates adjoints. Parameters are registered
// per tape (one tape per training step), so gradients of parameters that do
// not reach the loss are zero.

class GradTape {
 public:
  using NodeId = int;

  enum class Op {
    Constant,
    Parameter,
    MatMul,
    Transpose,
    Add,
    Scale,
    Relu,
    Log,
    MeanRows,
    SoftmaxRows,
    LogSoftmaxRows,
    SoftmaxCrossEntropy,
    GatherRows,
    GatherCols,
    StackRows,
    Sum,
    AbsMeanDiff,
  };

  NodeId constant(DenseTensor v) { return push(Op::Constant, {}, std::move(v), false); }

  NodeId parameter(DenseTensor v) { return push(Op::Parameter, {}, std::move(v), true); }

  NodeId matmul(NodeId a, NodeId b) {
    return push(Op::MatMul, {a, b}, fairsample::matmul(value(a), value(b)));
  }

  NodeId transpose(NodeId a) { return push(Op::Transpose, {a}, fairsample::transpose(value(a))); }

  NodeId add(NodeId a, NodeId b) { return push(Op::Add, {a, b}, fairsample::add(value(a), value(b))); }

  NodeId scale(NodeId a, double c) {
    NodeId id = push(Op::Scale, {a}, fairsample::scale(value(a), c));
    nodes_[id].factor = c;
    return id;
  }

  NodeId relu(NodeId a) { return push(Op::Relu, {a}, fairsample::relu(value(a))); }

  NodeId log_elem(NodeId a) {
    const DenseTensor& x = value(a);
    DenseTensor out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
      detail::require(x[i] > 0.0, "log: non-positive input");
      out[i] = std::log(x[i]);
    }
    return push(Op::Log, {a}, std::move(out));
  }

  // Mean over the rows of a matrix -> 1 x cols. This is the aggregation
  // primitive: stack the operand rows, then mean them.
  NodeId mean_rows(NodeId a) {
    const DenseTensor& x = value(a);
    detail::require(x.rows() >= 1, "mean_rows: empty input");
    DenseTensor out(1, x.cols());
    for (int i = 0; i < x.rows(); ++i)
      for (int j = 0; j < x.cols(); ++j) out.at(0, j) += x.at(i, j);
    for (int j = 0; j < x.cols(); ++j) out.at(0, j) /= x.rows();
    return push(Op::MeanRows, {a}, std::move(out));
  }

  NodeId softmax_rows(NodeId a) { return push(Op::SoftmaxRows, {a}, fairsample::softmax_rows(value(a))); }

  NodeId log_softmax_rows(NodeId a) {
    const DenseTensor& x = value(a);
    DenseTensor out(x.rows(), x.cols());
    for (int i = 0; i < x.rows(); ++i) {
      double mx = x.at(i, 0);
      for (int j = 1; j < x.cols(); ++j) mx = std::max(mx, x.at(i, j));
      double z = 0.0;
      for (int j = 0; j < x.cols(); ++j) z += std::exp(x.at(i, j) - mx);
      const double lz = mx + std::log(z);
      for (int j = 0; j < x.cols(); ++j) out.at(i, j) = x.at(i, j) - lz;
    }
    return push(Op::LogSoftmaxRows, {a}, std::move(out));
  }

  // Mean cross-entropy of row-wise softmax against integer labels -> 1x1.
  NodeId softmax_cross_entropy(NodeId logits, std::vector<int> labels) {
    const DenseTensor& x = value(logits);
    detail::require(static_cast<int>(labels.size()) == x.rows(),
                    "softmax_cross_entropy: one label per row required");
    for (int y : labels)
      detail::require(y >= 0 && y < x.cols(), "softmax_cross_entropy: label out of range");
    DenseTensor probs = fairsample::softmax_rows(x);
    double loss = 0.0;
    for (int i = 0; i < x.rows(); ++i) loss -= std::log(probs.at(i, labels[i]));
    loss /= x.rows();
    NodeId id = push(Op::SoftmaxCrossEntropy, {logits}, DenseTensor(1, 1, loss));
    nodes_[id].probs = std::move(probs);
    nodes_[id].indices = std::move(labels);
    return id;
  }

  NodeId gather_rows(NodeId a, std::vector<int> idx) {
    const DenseTensor& x = value(a);
    detail::require(!idx.empty(), "gather_rows: empty index list");
    DenseTensor out(static_cast<int>(idx.size()), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      detail::require(idx[i] >= 0 && idx[i] < x.rows(), "gather_rows: index out of range");
      for (int j = 0; j < x.cols(); ++j) out.at(static_cast<int>(i), j) = x.at(idx[i], j);
    }
    NodeId id = push(Op::GatherRows, {a}, std::move(out));
    nodes_[id].indices = std::move(idx);
    return id;
  }

  NodeId gather_cols(NodeId a, std::vector<int> idx) {
    const DenseTensor& x = value(a);
    detail::require(!idx.empty(), "gather_cols: empty index list");
    DenseTensor out(x.rows(), static_cast<int>(idx.size()));
    for (int i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < idx.size(); ++j) {
        detail::require(idx[j] >= 0 && idx[j] < x.cols(), "gather_cols: index out of range");
        out.at(i, static_cast<int>(j)) = x.at(i, idx[j]);
      }
    NodeId id = push(Op::GatherCols, {a}, std::move(out));
    nodes_[id].indices = std::move(idx);
    return id;
  }

  // Concatenate inputs along rows; all inputs must share the column count.
  NodeId stack_rows(const std::vector<NodeId>& parts) {
    detail::require(!parts.empty(), "stack_rows: empty input list");
    int total = 0;
    const int cols = value(parts[0]).cols();
    for (NodeId p : parts) {
      detail::require(value(p).cols() == cols, "stack_rows: column mismatch");
      total += value(p).rows();
    }
    DenseTensor out(total, cols);
    int r = 0;
    for (NodeId p : parts) {
      const DenseTensor& x = value(p);
      for (int i = 0; i < x.rows(); ++i, ++r)
        for (int j = 0; j < cols; ++j) out.at(r, j) = x.at(i, j);
    }
    return push(Op::StackRows, parts, std::move(out));
  }

  NodeId sum_all(NodeId a) {
    const DenseTensor& x = value(a);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i];
    return push(Op::Sum, {a}, DenseTensor(1, 1, s));
  }

  // | mean(a) - mean(b) | over all elements of each operand -> 1x1.
  // Subgradient 0 at an exact tie.
  NodeId abs_mean_diff(NodeId a, NodeId b) {
    const DenseTensor& x = value(a);
    const DenseTensor& y = value(b);
    detail::require(x.size() > 0 && y.size() > 0, "abs_mean_diff: empty operand");
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) ma += x[i];
    for (std::size_t i = 0; i < y.size(); ++i) mb += y[i];
    ma /= static_cast<double>(x.size());
    mb /= static_cast<double>(y.size());
    NodeId id = push(Op::AbsMeanDiff, {a, b}, DenseTensor(1, 1, std::fabs(ma - mb)));
    nodes_[id].factor = (ma > mb) ? 1.0 : (ma < mb ? -1.0 : 0.0);
    return id;
  }

  const DenseTensor& value(NodeId id) const { return nodes_.at(id).value; }

  bool requires_grad(NodeId id) const { return nodes_.at(id).needs_grad; }

  std::size_t node_count() const { return nodes_.size(); }

  /// Reverse sweep from a scalar loss node. May be called once per tape.
  void backward(NodeId loss) {
    detail::require(!consumed_, "backward: tape already consumed");
    const DenseTensor& l = value(loss);
    detail::require(l.rows() == 1 && l.cols() == 1, "backward: loss node is not scalar");
    consumed_ = true;
    adjoints_.assign(nodes_.size(), DenseTensor());
    adjoint(loss) = DenseTensor(1, 1, 1.0);
    for (int id = loss; id >= 0; --id) {
      if (adjoints_[id].size() == 0) continue;  // node does not reach the loss
      propagate(id);
    }
  }

  /// Adjoint of any node after backward(); zero tensor for parameters the
  /// loss never touched.
  DenseTensor gradient(NodeId id) const {
    detail::require(consumed_, "gradient: call backward first");
    if (adjoints_[id].size() == 0) {
      const DenseTensor& v = value(id);
      return DenseTensor(v.rows(), v.cols(), 0.0);
    }
    return adjoints_[id];
  }

 private:
  struct Node {
    Op op;
    std::vector<NodeId> inputs;
    DenseTensor value;
    double factor = 0.0;           // Scale constant / AbsMeanDiff sign
    std::vector<int> indices;      // gather indices / CE labels
    DenseTensor probs;             // cached softmax for CE backward
    bool needs_grad = false;
  };

  NodeId push(Op op, std::vector<NodeId> inputs, DenseTensor v, bool needs_grad_self = false) {
    detail::require(!consumed_, "tape already consumed; start a fresh tape");
    detail::require(v.all_finite(), "non-finite result in tape op (divergence)");
    bool ng = needs_grad_self;
    for (NodeId i : inputs) ng = ng || nodes_.at(i).needs_grad;
    Node n;
    n.op = op;
    n.inputs = std::move(inputs);
    n.value = std::move(v);
    n.needs_grad = ng;
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
  }

  DenseTensor& adjoint(NodeId id) {
    if (adjoints_[id].size() == 0) {
      const DenseTensor& v = nodes_[id].value;
      adjoints_[id] = DenseTensor(v.rows(), v.cols(), 0.0);
    }
    return adjoints_[id];
  }

  void accumulate(NodeId id, const DenseTensor& g) {
    if (!nodes_[id].needs_grad) return;
    DenseTensor& a = adjoint(id);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += g[i];
  }

  void propagate(NodeId id) {
    const Node& n = nodes_[id];
    bool any = false;
    for (NodeId i : n.inputs) any = any || nodes_[i].needs_grad;
    if (!any) return;
    const DenseTensor& g = adjoints_[id];
    switch (n.op) {
      case Op::Constant:
      case Op::Parameter:
        break;
      case Op::MatMul: {
        const DenseTensor& a = nodes_[n.inputs[0]].value;
        const DenseTensor& b = nodes_[n.inputs[1]].value;
        if (nodes_[n.inputs[0]].needs_grad) accumulate(n.inputs[0], fairsample::matmul(g, fairsample::transpose(b)));
        if (nodes_[n.inputs[1]].needs_grad) accumulate(n.inputs[1], fairsample::matmul(fairsample::transpose(a), g));
        break;
      }
      case Op::Transpose:
        accumulate(n.inputs[0], fairsample::transpose(g));
        break;
      case Op::Add:
        accumulate(n.inputs[0], g);
        accumulate(n.inputs[1], g);
        break;
      case Op::Scale:
        accumulate(n.inputs[0], fairsample::scale(g, n.factor));
        break;
      case Op::Relu: {
        const DenseTensor& x = nodes_[n.inputs[0]].value;
        DenseTensor gx = g;
        for (std::size_t i = 0; i < gx.size(); ++i)
          if (x[i] <= 0.0) gx[i] = 0.0;
        accumulate(n.inputs[0], gx);
        break;
      }
      case Op::Log: {
        const DenseTensor& x = nodes_[n.inputs[0]].value;
        DenseTensor gx = g;
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] /= x[i];
        accumulate(n.inputs[0], gx);
        break;
      }
      case Op::MeanRows: {
        const DenseTensor& x = nodes_[n.inputs[0]].value;
        DenseTensor gx(x.rows(), x.cols());
        for (int i = 0; i < x.rows(); ++i)
          for (int j = 0; j < x.cols(); ++j) gx.at(i, j) = g.at(0, j) / x.rows();
        accumulate(n.inputs[0], gx);
        break;
      }
      case Op::SoftmaxRows: {
        const DenseTensor& p = n.value;
        DenseTensor gx(p.rows(), p.cols());
        for (int i = 0; i < p.rows(); ++i) {
          double dot = 0.0;
          for (int j = 0; j < p.cols(); ++j) dot += g.at(i, j) * p.at(i, j);
          for (int j = 0; j < p.cols(); ++j) gx.at(i, j) = p.at(i, j) * (g.at(i, j) - dot);
        }
        accumulate(n.inputs[0], gx);
        break;
      }
      case Op::LogSoftmaxRows: {
        const DenseTensor& lp = n.value;
        DenseTensor gx(lp.rows(), lp.cols());
        for (int i = 0; i < lp.rows(); ++i) {
          double rowsum = 0.0;
          for (int j = 0; j < lp.cols(); ++j) rowsum += g.at(i, j);
          for (int j = 0; j < lp.cols(); ++j) gx.at(i, j) = g.at(i, j) - std::exp(lp.at(i, j)) * rowsum;
        }
        accumulate(n.inputs[0], gx);
        break;
      }
      case Op::SoftmaxCrossEntropy: {
        const DenseTensor& p = n.probs;
        const double gs = g.scalar();
        DenseTensor gx = p;
        for (int i = 0; i < p.rows(); ++i) gx.at(i, n.indices[i]) -= 1.0;
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= gs / p.rows();
        accumulate(n.inputs[0], gx);
        break;
      }
      case Op::GatherRows: {
        const DenseTensor& x = nodes_[n.inputs[0]].value;
        DenseTensor gx(x.rows(), x.cols());
        for (std::size_t i = 0; i < n.indices.size(); ++i)
          for (int j = 0; j < x.cols(); ++j) gx.at(n.indices[i], j) += g.at(static_cast<int>(i), j);
        accumulate(n.inputs[0], gx);
        break;
      }
      case Op::GatherCols: {
        const DenseTensor& x = nodes_[n.inputs[0]].value;
        DenseTensor gx(x.rows(), x.cols());
        for (int i = 0; i < x.rows(); ++i)
          for (std::size_t j = 0; j < n.indices.size(); ++j) gx.at(i, n.indices[j]) += g.at(i, static_cast<int>(j));
        accumulate(n.inputs[0], gx);
        break;
      }
      case Op::StackRows: {
        int r = 0;
        for (NodeId p : n.inputs) {
          const DenseTensor& x = nodes_[p].value;
          if (nodes_[p].needs_grad) {
            DenseTensor gp(x.rows(), x.cols());
            for (int i = 0; i < x.rows(); ++i)
              for (int j = 0; j < x.cols(); ++j) gp.at(i, j) = g.at(r + i, j);
            accumulate(p, gp);
          }
          r += x.rows();
        }
        break;
      }
      case Op::Sum: {
        const DenseTensor& x = nodes_[n.inputs[0]].value;
        accumulate(n.inputs[0], DenseTensor(x.rows(), x.cols(), g.scalar()));
        break;
      }
      case Op::AbsMeanDiff: {
        const DenseTensor& x = nodes_[n.inputs[0]].value;
        const DenseTensor& y = nodes_[n.inputs[1]].value;
        const double gs = g.scalar() * n.factor;
        accumulate(n.inputs[0], DenseTensor(x.rows(), x.cols(), gs / static_cast<double>(x.size())));
        accumulate(n.inputs[1], DenseTensor(y.rows(), y.cols(), -gs / static_cast<double>(y.size())));
        break;
      }
    }
  }

  std::vector<Node> nodes_;
  std::vector<DenseTensor> adjoints_;
  bool consumed_ = false;
};

}  // namespace fairsample
