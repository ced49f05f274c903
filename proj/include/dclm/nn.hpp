#ifndef DCLM_NN_HPP
#define DCLM_NN_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dclm/graph.hpp"
#include "dclm/rng.hpp"
#include "dclm/tensor.hpp"

namespace dclm {

enum class Variant { kRnnlm, kDrnnlm, kCcDclm, kCoDclm, kADclm };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kRnnlm: return "rnnlm";
    case Variant::kDrnnlm: return "drnnlm";
    case Variant::kCcDclm: return "ccdclm";
    case Variant::kCoDclm: return "codclm";
    case Variant::kADclm: return "adclm";
  }
  throw std::invalid_argument("variant_name: unknown variant");
}

inline Variant parse_variant(const std::string& s) {
  if (s == "rnnlm") return Variant::kRnnlm;
  if (s == "drnnlm") return Variant::kDrnnlm;
  if (s == "ccdclm") return Variant::kCcDclm;
  if (s == "codclm") return Variant::kCoDclm;
  if (s == "adclm") return Variant::kADclm;
  throw std::invalid_argument("unknown variant '" + s + "'");
}

// Uniform init on [-sqrt(6/(d1+d2)), sqrt(6/(d1+d2))] for a d1 x d2 tensor.
inline Tensor glorot_init(int d1, int d2, Rng& rng) {
  if (d1 < 1 || d2 < 1) {
    throw std::invalid_argument("glorot_init: dimensions must be positive");
  }
  const double bound = std::sqrt(6.0 / (d1 + d2));
  Tensor t(d1, d2);
  for (double& x : t.data) x = uniform_real(rng, -bound, bound);
  return t;
}

// Registry of trainable tensors. Registration order is the canonical order
// used for checkpoints and optimizer state.
class ParamStore {
 public:
  ParamTensor& add(const std::string& name, int rows, int cols) {
    items_.push_back(ParamTensor(name, rows, cols));
    return items_.back();
  }

  ParamTensor& add_glorot(const std::string& name, int rows, int cols, Rng& rng) {
    ParamTensor& p = add(name, rows, cols);
    p.value = glorot_init(rows, cols, rng);
    return p;
  }

  std::size_t count() const { return items_.size(); }

  long long scalar_count() const {
    long long n = 0;
    for (const ParamTensor& p : items_) n += p.value.size();
    return n;
  }

  ParamTensor& operator[](std::size_t i) { return items_[i]; }
  const ParamTensor& operator[](std::size_t i) const { return items_[i]; }

  ParamTensor* find(const std::string& name) {
    for (ParamTensor& p : items_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }

  void zero_grads() {
    for (ParamTensor& p : items_) p.zero_grad();
  }

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  std::vector<ParamTensor> items_;
};

// Per-graph cache of parameter leaf nodes, so each ParamTensor becomes one
// node per graph and its gradient accumulates across all uses.
class ParamNodeCache {
 public:
  explicit ParamNodeCache(Graph& g) : g_(g) {}

  int node(ParamTensor& p) {
    auto it = ids_.find(&p);
    if (it != ids_.end()) return it->second;
    int id = g_.param(p);
    ids_.emplace(&p, id);
    return id;
  }

  Graph& graph() { return g_; }

 private:
  Graph& g_;
  std::unordered_map<const ParamTensor*, int> ids_;
};

// One stacked-LSTM layer: 4 gates (input, forget, output, candidate), each
// with an input weight (H x I), a recurrent weight (H x H) and a bias (H x 1).
// Parameters are referenced by ParamStore index so owners stay copyable.
struct LstmLayer {
  int input_dim = 0;
  int hidden_dim = 0;
  int Wx[4] = {-1, -1, -1, -1};
  int Wh[4] = {-1, -1, -1, -1};
  int b[4] = {-1, -1, -1, -1};
};

inline LstmLayer make_lstm_layer(ParamStore& store, const std::string& prefix, int input_dim,
                                 int hidden_dim, Rng& rng) {
  static const char* kGate[4] = {"i", "f", "o", "g"};
  LstmLayer layer;
  layer.input_dim = input_dim;
  layer.hidden_dim = hidden_dim;
  for (int k = 0; k < 4; ++k) {
    layer.Wx[k] = static_cast<int>(store.count());
    store.add_glorot(prefix + ".Wx" + kGate[k], hidden_dim, input_dim, rng);
    layer.Wh[k] = static_cast<int>(store.count());
    store.add_glorot(prefix + ".Wh" + kGate[k], hidden_dim, hidden_dim, rng);
    layer.b[k] = static_cast<int>(store.count());
    store.add(prefix + ".b" + kGate[k], hidden_dim, 1);
  }
  return layer;
}

// (hidden, cell) node ids per layer, within one graph.
struct LstmState {
  struct Layer {
    int h = -1;
    int c = -1;
  };
  std::vector<Layer> layers;
};

inline LstmState lstm_zero_state(Graph& g, std::span<const LstmLayer> layers) {
  LstmState st;
  st.layers.reserve(layers.size());
  for (const LstmLayer& l : layers) {
    LstmState::Layer s;
    s.h = g.input(Tensor(l.hidden_dim, 1));
    s.c = g.input(Tensor(l.hidden_dim, 1));
    st.layers.push_back(s);
  }
  return st;
}

// One step through the stack; the lower layer's hidden feeds the upper
// layer's input, and the top hidden is returned.
inline std::pair<int, LstmState> lstm_step(Graph& g, ParamNodeCache& pc, ParamStore& store,
                                           std::span<const LstmLayer> layers, int x,
                                           const LstmState& prev) {
  if (layers.empty()) {
    throw std::invalid_argument("lstm_step: no layers");
  }
  if (prev.layers.size() != layers.size()) {
    throw std::invalid_argument("lstm_step: state has " + std::to_string(prev.layers.size()) +
                                " layers, stack has " + std::to_string(layers.size()));
  }
  if (g.value(x).rows != layers[0].input_dim || !g.value(x).is_column()) {
    throw std::invalid_argument("lstm_step: input is " + g.value(x).shape_str() +
                                ", layer expects " + std::to_string(layers[0].input_dim) + "x1");
  }
  LstmState next;
  next.layers.resize(layers.size());
  int in = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LstmLayer& layer = layers[l];
    const int h_prev = prev.layers[l].h;
    const int c_prev = prev.layers[l].c;
    int pre[4];
    for (int k = 0; k < 4; ++k) {
      pre[k] = g.add(g.affine(pc.node(store[layer.Wx[k]]), in, pc.node(store[layer.b[k]])),
                     g.matvec(pc.node(store[layer.Wh[k]]), h_prev));
    }
    const int gi = g.logistic(pre[0]);
    const int gf = g.logistic(pre[1]);
    const int go = g.logistic(pre[2]);
    const int gg = g.tanh(pre[3]);
    const int c = g.add(g.mul(gf, c_prev), g.mul(gi, gg));
    const int h = g.mul(go, g.tanh(c));
    next.layers[l].h = h;
    next.layers[l].c = c;
    in = h;
  }
  return {in, next};
}

struct ClipReport {
  double norm = 0.0;   // global L2 norm before clipping
  double scale = 1.0;  // factor applied
};

// Global-norm clipping over a set of gradient tensors.
inline ClipReport clip_gradients(std::span<Tensor*> grads, double tau) {
  if (tau <= 0.0) {
    throw std::invalid_argument("clip_gradients: tau must be positive");
  }
  double sq = 0.0;
  for (const Tensor* t : grads) {
    for (double x : t->data) sq += x * x;
  }
  ClipReport rep;
  rep.norm = std::sqrt(sq);
  if (rep.norm > tau) {
    rep.scale = tau / rep.norm;
    for (Tensor* t : grads) {
      for (double& x : t->data) x *= rep.scale;
    }
  }
  return rep;
}

inline ClipReport clip_gradients(ParamStore& store, double tau) {
  std::vector<Tensor*> grads;
  grads.reserve(store.count());
  for (ParamTensor& p : store) grads.push_back(&p.grad);
  return clip_gradients(std::span<Tensor*>(grads), tau);
}

// AdaGrad: per-coordinate accumulated squared gradients plus the learning
// rate, clip threshold and damping used by the training loop.
struct OptimizerState {
  double lambda = 0.1;
  double tau = 5.0;
  double eps = 1e-8;
  std::vector<Tensor> accum;  // aligned with ParamStore order

  OptimizerState(const ParamStore& store, double lambda_in, double tau_in, double eps_in = 1e-8)
      : lambda(lambda_in), tau(tau_in), eps(eps_in) {
    if (lambda <= 0.0 || tau <= 0.0) {
      throw std::invalid_argument("OptimizerState: lambda and tau must be positive");
    }
    accum.reserve(store.count());
    for (const ParamTensor& p : store) accum.push_back(Tensor(p.value.rows, p.value.cols));
  }
};

// accum += g^2; param -= lambda * g / (sqrt(accum) + eps), elementwise.
inline void adagrad_update(ParamStore& store, OptimizerState& opt) {
  if (opt.accum.size() != store.count()) {
    throw std::invalid_argument("adagrad_update: optimizer state does not match store");
  }
  for (std::size_t i = 0; i < store.count(); ++i) {
    ParamTensor& p = store[i];
    Tensor& acc = opt.accum[i];
    require_same_shape(p.grad, acc, "adagrad_update");
    for (int j = 0; j < p.value.size(); ++j) {
      const double gval = p.grad.at(j);
      if (gval == 0.0) continue;
      acc.at(j) += gval * gval;
      p.value.at(j) -= opt.lambda * gval / (std::sqrt(acc.at(j)) + opt.eps);
    }
  }
}

// Exact trainable-scalar counts for this implementation: a standard 4-gate
// two-layer LSTM (4 input weights per layer, not the 3 implied by some
// published closed forms; see param_count_published).
inline long long param_count(Variant v, long long V, long long K, long long H, long long A = 48) {
  if (V < 1 || K < 1 || H < 1 || A < 1) {
    throw std::invalid_argument("param_count: dimensions must be positive");
  }
  const auto lstm_stack = [&](long long input_dim) {
    const long long layer1 = 4 * (H * input_dim + H * H + H);
    const long long layer2 = 4 * (H * H + H * H + H);
    return layer1 + layer2;
  };
  switch (v) {
    case Variant::kRnnlm:
    case Variant::kDrnnlm:
      return V * K + lstm_stack(K) + V * H + V;
    case Variant::kCcDclm:
      return V * K + lstm_stack(K + H) + V * H + V + H;
    case Variant::kCoDclm:
      return V * K + lstm_stack(K) + 2 * V * H + V + H;
    case Variant::kADclm:
      return V * K + lstm_stack(K + H) + (2 * H * H + H) + V * H + (2 * A * H + A) + H;
  }
  throw std::invalid_argument("param_count: unknown variant");
}

// Published closed forms for the context-to-context and context-to-output
// models. They assume a different internal LSTM layout (3HK input-weight
// coefficients where the standard 4-gate cell has 4HK), so they differ from
// param_count; reported for reference, never used for allocation.
inline long long param_count_published(Variant v, long long V, long long K, long long H) {
  switch (v) {
    case Variant::kCcDclm:
      return H * (16 * H + 3 * K + 6) + V * (H + K + 1);
    case Variant::kCoDclm:
      return H * (13 * H + 3 * K + 6) + V * (2 * H + K + 1);
    default:
      return -1;  // no published form
  }
}

}  // namespace dclm

#endif  // DCLM_NN_HPP
