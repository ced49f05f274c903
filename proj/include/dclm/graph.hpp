#ifndef DCLM_GRAPH_HPP
#define DCLM_GRAPH_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dclm/tensor.hpp"

namespace dclm {

// A trainable tensor. Lives outside any graph; backward() accumulates into
// grad, so gradients add up across graphs until zero_grad.
struct ParamTensor {
  std::string name;
  Tensor value;
  Tensor grad;

  ParamTensor() = default;
  ParamTensor(std::string n, int r, int c)
      : name(std::move(n)), value(r, c), grad(r, c) {}

  void zero_grad() { grad.set_zero(); }
};

enum class Op {
  kInput,
  kParam,
  kLookup,
  kAffine,
  kMatVec,
  kConcat,
  kTanh,
  kLogistic,
  kAdd,
  kMul,
  kDot,
  kSoftmax,
  kWeightedSum,
  kNegLogSoftmaxPick,
};

enum class PointwiseKind { kTanh, kLogistic, kAdd, kMul };

// Dynamic computation graph with eager forward evaluation and reverse-mode
// differentiation. Built per example and discarded; creation order is
// topological order. Single-threaded; parameters it references may be shared
// read-only across graphs.
class Graph {
 public:
  struct Node {
    Op op;
    std::vector<int> args;
    Tensor value;
    Tensor grad;
    ParamTensor* param = nullptr;  // kParam / kLookup
    int pick = -1;                 // kLookup row / kNegLogSoftmaxPick target
    Tensor aux;                    // kNegLogSoftmaxPick: cached softmax
  };

  // Leaf holding a constant tensor.
  int input(Tensor t) {
    if (!t.all_finite()) {
      throw std::invalid_argument("Graph::input: non-finite entries");
    }
    Node n;
    n.op = Op::kInput;
    n.value = std::move(t);
    return push(std::move(n));
  }

  // Leaf bound to a trainable tensor; backward flushes into p.grad.
  int param(ParamTensor& p) {
    Node n;
    n.op = Op::kParam;
    n.param = &p;
    n.value = p.value;
    return push(std::move(n));
  }

  // Row `row` of a table (e.g. an embedding matrix), as a column vector.
  int lookup(ParamTensor& table, int row) {
    if (row < 0 || row >= table.value.rows) {
      throw std::out_of_range("Graph::lookup: row " + std::to_string(row) +
                              " out of range for " + table.value.shape_str());
    }
    Node n;
    n.op = Op::kLookup;
    n.param = &table;
    n.pick = row;
    n.value = Tensor(table.value.cols, 1);
    for (int j = 0; j < table.value.cols; ++j) n.value.at(j) = table.value(row, j);
    return push(std::move(n));
  }

  // W*x + b with W m x n, x n x 1, b m x 1.
  int affine(int W, int x, int b) {
    const Tensor& w = value(W);
    const Tensor& xv = value(x);
    const Tensor& bv = value(b);
    check_matvec(w, xv, "Graph::affine");
    if (bv.rows != w.rows || bv.cols != 1) {
      throw std::invalid_argument("Graph::affine: bias shape " + bv.shape_str() +
                                  " does not match " + std::to_string(w.rows) + "x1");
    }
    Node n;
    n.op = Op::kAffine;
    n.args = {W, x, b};
    n.value = Tensor(w.rows, 1);
    for (int i = 0; i < w.rows; ++i) {
      double s = bv.at(i);
      for (int j = 0; j < w.cols; ++j) s += w(i, j) * xv.at(j);
      n.value.at(i) = s;
    }
    return push(std::move(n));
  }

  // W*x without bias.
  int matvec(int W, int x) {
    const Tensor& w = value(W);
    const Tensor& xv = value(x);
    check_matvec(w, xv, "Graph::matvec");
    Node n;
    n.op = Op::kMatVec;
    n.args = {W, x};
    n.value = Tensor(w.rows, 1);
    for (int i = 0; i < w.rows; ++i) {
      double s = 0.0;
      for (int j = 0; j < w.cols; ++j) s += w(i, j) * xv.at(j);
      n.value.at(i) = s;
    }
    return push(std::move(n));
  }

  // Stack column vectors top to bottom.
  int concat(std::span<const int> parts) {
    if (parts.empty()) {
      throw std::invalid_argument("Graph::concat: no operands");
    }
    int total = 0;
    for (int id : parts) {
      const Tensor& v = value(id);
      if (!v.is_column()) {
        throw std::invalid_argument("Graph::concat: operand is " + v.shape_str() +
                                    ", expected a column vector");
      }
      total += v.rows;
    }
    Node n;
    n.op = Op::kConcat;
    n.args.assign(parts.begin(), parts.end());
    n.value = Tensor(total, 1);
    int at = 0;
    for (int id : parts) {
      const Tensor& v = value(id);
      for (int i = 0; i < v.rows; ++i) n.value.at(at++) = v.at(i);
    }
    return push(std::move(n));
  }

  int concat(int a, int b) {
    const int parts[2] = {a, b};
    return concat(std::span<const int>(parts, 2));
  }

  int tanh(int x) {
    Node n;
    n.op = Op::kTanh;
    n.args = {x};
    n.value = value(x);
    for (double& v : n.value.data) v = std::tanh(v);
    return push(std::move(n));
  }

  int logistic(int x) {
    Node n;
    n.op = Op::kLogistic;
    n.args = {x};
    n.value = value(x);
    for (double& v : n.value.data) v = 1.0 / (1.0 + std::exp(-v));
    return push(std::move(n));
  }

  // Elementwise sum of two or more same-shape nodes.
  int add(std::span<const int> xs) {
    if (xs.size() < 2) {
      throw std::invalid_argument("Graph::add: needs at least two operands");
    }
    Node n;
    n.op = Op::kAdd;
    n.args.assign(xs.begin(), xs.end());
    n.value = value(xs[0]);
    for (std::size_t k = 1; k < xs.size(); ++k) {
      const Tensor& v = value(xs[k]);
      require_same_shape(n.value, v, "Graph::add");
      for (int i = 0; i < v.size(); ++i) n.value.at(i) += v.at(i);
    }
    return push(std::move(n));
  }

  int add(int a, int b) {
    const int xs[2] = {a, b};
    return add(std::span<const int>(xs, 2));
  }

  // Elementwise (Hadamard) product.
  int mul(int a, int b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require_same_shape(av, bv, "Graph::mul");
    Node n;
    n.op = Op::kMul;
    n.args = {a, b};
    n.value = av;
    for (int i = 0; i < bv.size(); ++i) n.value.at(i) *= bv.at(i);
    return push(std::move(n));
  }

  int pointwise(PointwiseKind kind, std::span<const int> operands) {
    switch (kind) {
      case PointwiseKind::kTanh:
        require_arity(operands, 1, "tanh");
        return tanh(operands[0]);
      case PointwiseKind::kLogistic:
        require_arity(operands, 1, "logistic");
        return logistic(operands[0]);
      case PointwiseKind::kAdd:
        return add(operands);
      case PointwiseKind::kMul:
        require_arity(operands, 2, "mul");
        return mul(operands[0], operands[1]);
    }
    throw std::invalid_argument("Graph::pointwise: unknown kind");
  }

  // Inner product of two column vectors; result is 1x1.
  int dot(int a, int b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require_same_shape(av, bv, "Graph::dot");
    if (!av.is_column()) {
      throw std::invalid_argument("Graph::dot: operands must be column vectors");
    }
    Node n;
    n.op = Op::kDot;
    n.args = {a, b};
    n.value = Tensor(1, 1);
    double s = 0.0;
    for (int i = 0; i < av.rows; ++i) s += av.at(i) * bv.at(i);
    n.value.at(0) = s;
    return push(std::move(n));
  }

  // Softmax over a column vector, max-subtracted for stability.
  int softmax(int x) {
    const Tensor& xv = value(x);
    if (!xv.is_column()) {
      throw std::invalid_argument("Graph::softmax: input must be a column vector");
    }
    Node n;
    n.op = Op::kSoftmax;
    n.args = {x};
    n.value = softmax_tensor(xv);
    return push(std::move(n));
  }

  // sum_m alpha[m] * h_m with alpha M x 1 and each h_m an equal-length column.
  int weighted_sum(int alpha, std::span<const int> hs) {
    const Tensor& av = value(alpha);
    if (!av.is_column() || av.rows != static_cast<int>(hs.size())) {
      throw std::invalid_argument("Graph::weighted_sum: weight vector is " + av.shape_str() +
                                  " for " + std::to_string(hs.size()) + " vectors");
    }
    if (hs.empty()) {
      throw std::invalid_argument("Graph::weighted_sum: no vectors");
    }
    const int dim = value(hs[0]).rows;
    Node n;
    n.op = Op::kWeightedSum;
    n.args.reserve(hs.size() + 1);
    n.args.push_back(alpha);
    n.args.insert(n.args.end(), hs.begin(), hs.end());
    n.value = Tensor(dim, 1);
    for (std::size_t m = 0; m < hs.size(); ++m) {
      const Tensor& h = value(hs[m]);
      if (h.rows != dim || !h.is_column()) {
        throw std::invalid_argument("Graph::weighted_sum: vector shape mismatch");
      }
      const double w = av.at(static_cast<int>(m));
      for (int i = 0; i < dim; ++i) n.value.at(i) += w * h.at(i);
    }
    return push(std::move(n));
  }

  // -log softmax(logits)[target]; scalar loss node.
  int neg_log_softmax_pick(int logits, int target) {
    const Tensor& lv = value(logits);
    if (!lv.is_column()) {
      throw std::invalid_argument("Graph::neg_log_softmax_pick: logits must be a column");
    }
    if (target < 0 || target >= lv.rows) {
      throw std::out_of_range("Graph::neg_log_softmax_pick: target " + std::to_string(target) +
                              " out of range for " + std::to_string(lv.rows) + " logits");
    }
    Node n;
    n.op = Op::kNegLogSoftmaxPick;
    n.args = {logits};
    n.pick = target;
    n.aux = softmax_tensor(lv);
    double maxv = lv.at(0);
    for (int i = 1; i < lv.rows; ++i) maxv = std::max(maxv, lv.at(i));
    double lse = 0.0;
    for (int i = 0; i < lv.rows; ++i) lse += std::exp(lv.at(i) - maxv);
    n.value = Tensor(1, 1);
    n.value.at(0) = std::log(lse) - (lv.at(target) - maxv);
    return push(std::move(n));
  }

  // Reverse sweep from a scalar root. Populates grad of every node reachable
  // from root (others stay zero) and accumulates into bound ParamTensors.
  void backward(int root) {
    const Tensor& rv = value(root);
    if (rv.rows != 1 || rv.cols != 1) {
      throw std::invalid_argument("Graph::backward: root must be scalar, got " + rv.shape_str());
    }
    for (Node& n : nodes_) {
      n.grad = Tensor(n.value.rows, n.value.cols);
    }
    std::vector<char> reachable(nodes_.size(), 0);
    reachable[static_cast<std::size_t>(root)] = 1;
    nodes_[static_cast<std::size_t>(root)].grad.at(0) = 1.0;

    for (int id = root; id >= 0; --id) {
      if (!reachable[static_cast<std::size_t>(id)]) continue;
      Node& n = nodes_[static_cast<std::size_t>(id)];
      for (int a : n.args) reachable[static_cast<std::size_t>(a)] = 1;
      accumulate(n);
    }

    // Flush into parameter gradients (additively across graphs).
    for (Node& n : nodes_) {
      if (!n.param) continue;
      if (n.op == Op::kParam) {
        for (int i = 0; i < n.grad.size(); ++i) n.param->grad.at(i) += n.grad.at(i);
      } else if (n.op == Op::kLookup) {
        for (int j = 0; j < n.grad.rows; ++j) n.param->grad(n.pick, j) += n.grad.at(j);
      }
    }
  }

  const Tensor& value(int id) const { return node(id).value; }
  const Tensor& grad(int id) const { return node(id).grad; }

  double scalar(int id) const {
    const Tensor& v = value(id);
    if (v.size() != 1) {
      throw std::invalid_argument("Graph::scalar: node is " + v.shape_str());
    }
    return v.at(0);
  }

  std::size_t size() const { return nodes_.size(); }

  const Node& node(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) {
      throw std::out_of_range("Graph: node id " + std::to_string(id));
    }
    return nodes_[static_cast<std::size_t>(id)];
  }

 private:
  std::vector<Node> nodes_;

  int push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  Tensor& grad_of(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }

  static void check_matvec(const Tensor& w, const Tensor& x, const char* where) {
    if (!x.is_column() || w.cols != x.rows) {
      throw std::invalid_argument(std::string(where) + ": cannot multiply " + w.shape_str() +
                                  " by " + x.shape_str());
    }
  }

  static void require_arity(std::span<const int> xs, std::size_t n, const char* kind) {
    if (xs.size() != n) {
      throw std::invalid_argument("Graph::pointwise " + std::string(kind) + ": expected " +
                                  std::to_string(n) + " operands, got " +
                                  std::to_string(xs.size()));
    }
  }

  static Tensor softmax_tensor(const Tensor& x) {
    Tensor s(x.rows, 1);
    double maxv = x.at(0);
    for (int i = 1; i < x.rows; ++i) maxv = std::max(maxv, x.at(i));
    double z = 0.0;
    for (int i = 0; i < x.rows; ++i) {
      s.at(i) = std::exp(x.at(i) - maxv);
      z += s.at(i);
    }
    for (int i = 0; i < x.rows; ++i) s.at(i) /= z;
    return s;
  }

  void accumulate(Node& n) {
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::kInput:
      case Op::kParam:
      case Op::kLookup:
        break;
      case Op::kAffine: {
        Tensor& dW = grad_of(n.args[0]);
        Tensor& dx = grad_of(n.args[1]);
        Tensor& db = grad_of(n.args[2]);
        const Tensor& w = value(n.args[0]);
        const Tensor& xv = value(n.args[1]);
        for (int i = 0; i < w.rows; ++i) {
          const double gi = g.at(i);
          db.at(i) += gi;
          for (int j = 0; j < w.cols; ++j) {
            dW(i, j) += gi * xv.at(j);
            dx.at(j) += w(i, j) * gi;
          }
        }
        break;
      }
      case Op::kMatVec: {
        Tensor& dW = grad_of(n.args[0]);
        Tensor& dx = grad_of(n.args[1]);
        const Tensor& w = value(n.args[0]);
        const Tensor& xv = value(n.args[1]);
        for (int i = 0; i < w.rows; ++i) {
          const double gi = g.at(i);
          for (int j = 0; j < w.cols; ++j) {
            dW(i, j) += gi * xv.at(j);
            dx.at(j) += w(i, j) * gi;
          }
        }
        break;
      }
      case Op::kConcat: {
        int at = 0;
        for (int a : n.args) {
          Tensor& da = grad_of(a);
          for (int i = 0; i < da.rows; ++i) da.at(i) += g.at(at++);
        }
        break;
      }
      case Op::kTanh: {
        Tensor& dx = grad_of(n.args[0]);
        for (int i = 0; i < g.size(); ++i) {
          const double y = n.value.at(i);
          dx.at(i) += g.at(i) * (1.0 - y * y);
        }
        break;
      }
      case Op::kLogistic: {
        Tensor& dx = grad_of(n.args[0]);
        for (int i = 0; i < g.size(); ++i) {
          const double y = n.value.at(i);
          dx.at(i) += g.at(i) * y * (1.0 - y);
        }
        break;
      }
      case Op::kAdd: {
        for (int a : n.args) {
          Tensor& da = grad_of(a);
          for (int i = 0; i < g.size(); ++i) da.at(i) += g.at(i);
        }
        break;
      }
      case Op::kMul: {
        Tensor& da = grad_of(n.args[0]);
        Tensor& db = grad_of(n.args[1]);
        const Tensor& av = value(n.args[0]);
        const Tensor& bv = value(n.args[1]);
        for (int i = 0; i < g.size(); ++i) {
          da.at(i) += g.at(i) * bv.at(i);
          db.at(i) += g.at(i) * av.at(i);
        }
        break;
      }
      case Op::kDot: {
        Tensor& da = grad_of(n.args[0]);
        Tensor& db = grad_of(n.args[1]);
        const Tensor& av = value(n.args[0]);
        const Tensor& bv = value(n.args[1]);
        const double g0 = g.at(0);
        for (int i = 0; i < av.rows; ++i) {
          da.at(i) += g0 * bv.at(i);
          db.at(i) += g0 * av.at(i);
        }
        break;
      }
      case Op::kSoftmax: {
        Tensor& dx = grad_of(n.args[0]);
        const Tensor& s = n.value;
        double sg = 0.0;
        for (int i = 0; i < s.rows; ++i) sg += s.at(i) * g.at(i);
        for (int i = 0; i < s.rows; ++i) dx.at(i) += s.at(i) * (g.at(i) - sg);
        break;
      }
      case Op::kWeightedSum: {
        Tensor& dalpha = grad_of(n.args[0]);
        const Tensor& alpha = value(n.args[0]);
        for (std::size_t m = 1; m < n.args.size(); ++m) {
          const Tensor& h = value(n.args[m]);
          Tensor& dh = grad_of(n.args[m]);
          const double w = alpha.at(static_cast<int>(m - 1));
          double dg = 0.0;
          for (int i = 0; i < h.rows; ++i) {
            dg += g.at(i) * h.at(i);
            dh.at(i) += w * g.at(i);
          }
          dalpha.at(static_cast<int>(m - 1)) += dg;
        }
        break;
      }
      case Op::kNegLogSoftmaxPick: {
        Tensor& dx = grad_of(n.args[0]);
        const double g0 = g.at(0);
        for (int i = 0; i < dx.rows; ++i) {
          const double onehot = (i == n.pick) ? 1.0 : 0.0;
          dx.at(i) += g0 * (n.aux.at(i) - onehot);
        }
        break;
      }
    }
  }
};

}  // namespace dclm

#endif  // DCLM_GRAPH_HPP
