#ifndef DCLM_MODEL_HPP
#define DCLM_MODEL_HPP

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dclm/corpus.hpp"
#include "dclm/graph.hpp"
#include "dclm/nn.hpp"
#include "dclm/rng.hpp"

namespace dclm {

struct ModelConfig {
  Variant variant = Variant::kRnnlm;
  int V = 0;  // vocabulary size, specials included
  int K = 0;  // word embedding dimension
  int H = 0;  // LSTM hidden dimension
  int A = 48; // attention hidden dimension (attentional variant only)
};

// Cross-sentence carry-over, as node ids within the current graph.
//
//   kRnnlm   nothing
//   kDrnnlm  the full LSTM state (both layers' hidden and cell)
//   kCcDclm  the previous sentence's final top-layer hidden
//   kCoDclm  the previous sentence's final top-layer hidden
//   kADclm   all of the previous sentence's top-layer hiddens
struct DocContext {
  Variant variant = Variant::kRnnlm;
  int context = -1;
  std::vector<int> prev_hiddens;
  std::optional<LstmState> state;
};

struct SentenceScore {
  std::vector<double> log_probs;  // N+1 entries: log p(w_1..w_N, END)
  std::vector<int> loss_nodes;    // -log p nodes, per position
  std::vector<int> logit_nodes;   // V x 1 logits, per position
  std::vector<int> hidden_nodes;  // top-layer hidden, per position
  DocContext next;
};

struct DocScore {
  double log_likelihood = 0.0;
  long long tokens = 0;  // predicted tokens: content words + one END per sentence
};

// One of the five language-model variants. A sentence is scored by feeding
// [START, w_1..w_N] and predicting [w_1..w_N, END]; START is never a
// prediction target. Parameters are immutable during scoring, so concurrent
// scorers over a shared model are safe; mutation belongs to training.
class Model {
 public:
  Model(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    validate_config(cfg);
    emb_ = add_glorot("emb", cfg.V, cfg.K, rng);
    const bool concat_input = cfg.variant == Variant::kCcDclm || cfg.variant == Variant::kADclm;
    const int input_dim = concat_input ? cfg.K + cfg.H : cfg.K;
    lstm_.push_back(make_lstm_layer(store_, "l1", input_dim, cfg.H, rng));
    lstm_.push_back(make_lstm_layer(store_, "l2", cfg.H, cfg.H, rng));
    switch (cfg.variant) {
      case Variant::kRnnlm:
      case Variant::kDrnnlm:
      case Variant::kCcDclm:
        out_W_ = add_glorot("out.W", cfg.V, cfg.H, rng);
        out_b_ = add_zeros("out.b", cfg.V, 1);
        break;
      case Variant::kCoDclm:
        out_Wh_ = add_glorot("out.Wh", cfg.V, cfg.H, rng);
        out_Wc_ = add_glorot("out.Wc", cfg.V, cfg.H, rng);
        out_b_ = add_zeros("out.b", cfg.V, 1);
        break;
      case Variant::kADclm:
        out_Wh_ = add_glorot("out.Wh", cfg.H, cfg.H, rng);
        out_Wc_ = add_glorot("out.Wc", cfg.H, cfg.H, rng);
        out_b_ = add_zeros("out.b", cfg.H, 1);
        out_W_ = add_glorot("out.W", cfg.V, cfg.H, rng);
        att_w_ = add_glorot("att.w", cfg.A, 1, rng);
        att_Wq_ = add_glorot("att.Wq", cfg.A, cfg.H, rng);
        att_Wm_ = add_glorot("att.Wm", cfg.A, cfg.H, rng);
        break;
    }
    if (uses_dummy_context()) {
      ctx0_ = add_glorot("ctx0", cfg.H, 1, rng);
    }
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  bool uses_dummy_context() const { return cfg_.variant != Variant::kRnnlm && cfg_.variant != Variant::kDrnnlm; }

  // Debug switch: emission becomes the uniform distribution over V.
  bool force_uniform = false;

  // Provenance recorded in checkpoints.
  int trained_segment_length = 0;
  std::uint64_t trained_seed = 0;

  // Context a document's first sentence sees: the learned dummy context for
  // the DCLM variants, a zero LSTM state for the boundary-free variant.
  DocContext initial_context(Graph& g, ParamNodeCache& pc) const {
    DocContext ctx;
    ctx.variant = cfg_.variant;
    switch (cfg_.variant) {
      case Variant::kRnnlm:
        break;
      case Variant::kDrnnlm:
        ctx.state = lstm_zero_state(g, lstm_);
        break;
      case Variant::kCcDclm:
      case Variant::kCoDclm:
        ctx.context = pc.node(store_[ctx0_]);
        break;
      case Variant::kADclm:
        ctx.prev_hiddens = {pc.node(store_[ctx0_])};
        break;
    }
    return ctx;
  }

  // Attention weights over the previous sentence's hiddens for one query:
  // softmax over w^T tanh(Wq q + Wm h_m). Non-negative, sum to 1.
  int attention_weights(Graph& g, ParamNodeCache& pc, int query,
                        std::span<const int> prev_hiddens) const {
    if (cfg_.variant != Variant::kADclm) {
      throw std::invalid_argument("attention_weights: not an attentional model");
    }
    if (prev_hiddens.empty()) {
      throw std::invalid_argument("attention_weights: empty context list");
    }
    const int wq_q = g.matvec(pc.node(store_[att_Wq_]), query);
    std::vector<int> scores;
    scores.reserve(prev_hiddens.size());
    for (int h : prev_hiddens) {
      const int e = g.tanh(g.add(wq_q, g.matvec(pc.node(store_[att_Wm_]), h)));
      scores.push_back(g.dot(pc.node(store_[att_w_]), e));
    }
    return g.softmax(g.concat(std::span<const int>(scores)));
  }

  SentenceScore score_sentence(Graph& g, ParamNodeCache& pc, const Sentence& sentence,
                               const DocContext& ctx) const {
    if (sentence.empty()) {
      throw std::invalid_argument("score_sentence: empty sentence");
    }
    check_context(ctx);

    std::vector<int> inputs;
    inputs.reserve(sentence.size() + 1);
    inputs.push_back(Vocabulary::kStart);
    inputs.insert(inputs.end(), sentence.begin(), sentence.end());
    std::vector<int> targets(sentence.begin(), sentence.end());
    targets.push_back(Vocabulary::kEnd);
    for (int t : targets) {
      if (t == Vocabulary::kStart) {
        throw std::logic_error("score_sentence: START can never be a prediction target");
      }
      if (t < 0 || t >= cfg_.V) {
        throw std::out_of_range("score_sentence: token id " + std::to_string(t) +
                                " outside vocabulary of " + std::to_string(cfg_.V));
      }
    }

    ParamStore& store = store_;
    LstmState state = (cfg_.variant == Variant::kDrnnlm) ? *ctx.state : lstm_zero_state(g, lstm_);

    // Context enters the output layer once per sentence for the
    // context-to-output variant.
    int co_bias = -1;
    if (cfg_.variant == Variant::kCoDclm) {
      co_bias = g.add(g.matvec(pc.node(store[out_Wc_]), ctx.context), pc.node(store[out_b_]));
    }

    SentenceScore out;
    const std::size_t steps = inputs.size();
    out.log_probs.reserve(steps);
    out.loss_nodes.reserve(steps);
    out.logit_nodes.reserve(steps);
    out.hidden_nodes.reserve(steps);

    for (std::size_t n = 0; n < steps; ++n) {
      const int emb = g.lookup(store[emb_], inputs[n]);
      int x = emb;
      int att_ctx = -1;
      switch (cfg_.variant) {
        case Variant::kRnnlm:
        case Variant::kDrnnlm:
        case Variant::kCoDclm:
          break;
        case Variant::kCcDclm:
          x = g.concat(emb, ctx.context);
          break;
        case Variant::kADclm: {
          // Query with the pre-step top hidden; the step's own hidden is
          // not available until the context it consumes exists.
          const int query = state.layers.back().h;
          const int alpha = attention_weights(g, pc, query, ctx.prev_hiddens);
          att_ctx = g.weighted_sum(alpha, ctx.prev_hiddens);
          x = g.concat(att_ctx, emb);
          break;
        }
      }
      auto [h, next_state] = lstm_step(g, pc, store, lstm_, x, state);
      state = std::move(next_state);

      int logits = -1;
      switch (cfg_.variant) {
        case Variant::kRnnlm:
        case Variant::kDrnnlm:
        case Variant::kCcDclm:
          logits = g.affine(pc.node(store[out_W_]), h, pc.node(store[out_b_]));
          break;
        case Variant::kCoDclm:
          logits = g.affine(pc.node(store[out_Wh_]), h, co_bias);
          break;
        case Variant::kADclm: {
          const int merged = g.tanh(g.add(g.affine(pc.node(store[out_Wh_]), h, pc.node(store[out_b_])),
                                          g.matvec(pc.node(store[out_Wc_]), att_ctx)));
          logits = g.matvec(pc.node(store[out_W_]), merged);
          break;
        }
      }
      if (force_uniform) {
        logits = g.input(Tensor(cfg_.V, 1));
      }
      const int loss = g.neg_log_softmax_pick(logits, targets[n]);
      out.loss_nodes.push_back(loss);
      out.logit_nodes.push_back(logits);
      out.hidden_nodes.push_back(h);
      out.log_probs.push_back(-g.scalar(loss));
    }

    out.next.variant = cfg_.variant;
    switch (cfg_.variant) {
      case Variant::kRnnlm:
        break;
      case Variant::kDrnnlm:
        out.next.state = std::move(state);
        break;
      case Variant::kCcDclm:
      case Variant::kCoDclm:
        out.next.context = out.hidden_nodes.back();
        break;
      case Variant::kADclm:
        out.next.prev_hiddens = out.hidden_nodes;
        break;
    }
    return out;
  }

  // Summed token loss over a whole document, context threaded in order.
  int build_document_loss(Graph& g, const EncodedDocument& doc) const {
    check_document(doc);
    ParamNodeCache pc(g);
    DocContext ctx = initial_context(g, pc);
    std::vector<int> losses;
    for (const Sentence& s : doc.sentences) {
      SentenceScore sc = score_sentence(g, pc, s, ctx);
      losses.insert(losses.end(), sc.loss_nodes.begin(), sc.loss_nodes.end());
      ctx = std::move(sc.next);
    }
    if (losses.size() == 1) return losses[0];
    return g.add(std::span<const int>(losses));
  }

  DocScore document_log_likelihood(const EncodedDocument& doc) const {
    check_document(doc);
    Graph g;
    ParamNodeCache pc(g);
    DocContext ctx = initial_context(g, pc);
    std::vector<double> sentence_totals;
    sentence_totals.reserve(doc.sentences.size());
    DocScore score;
    for (const Sentence& s : doc.sentences) {
      SentenceScore sc = score_sentence(g, pc, s, ctx);
      double total = 0.0;
      for (double lp : sc.log_probs) total += lp;
      sentence_totals.push_back(total);
      score.tokens += static_cast<long long>(sc.log_probs.size());
      ctx = std::move(sc.next);
    }
    // Sentence totals are accumulated in sorted order so documents with the
    // same sentence multiset and no cross-sentence coupling sum identically.
    std::sort(sentence_totals.begin(), sentence_totals.end());
    for (double t : sentence_totals) score.log_likelihood += t;
    return score;
  }

 private:
  ModelConfig cfg_;
  mutable ParamStore store_;  // grad slots are training scratch; forward-only scoring never writes
  std::vector<LstmLayer> lstm_;
  int emb_ = -1;
  int out_W_ = -1;
  int out_b_ = -1;
  int out_Wh_ = -1;
  int out_Wc_ = -1;
  int att_w_ = -1;
  int att_Wq_ = -1;
  int att_Wm_ = -1;
  int ctx0_ = -1;

  int add_glorot(const std::string& name, int r, int c, Rng& rng) {
    const int idx = static_cast<int>(store_.count());
    store_.add_glorot(name, r, c, rng);
    return idx;
  }

  int add_zeros(const std::string& name, int r, int c) {
    const int idx = static_cast<int>(store_.count());
    store_.add(name, r, c);
    return idx;
  }

  static void validate_config(const ModelConfig& cfg) {
    if (cfg.V < 3) {
      throw std::invalid_argument("ModelConfig: V must cover the reserved tokens (V >= 3)");
    }
    if (cfg.K < 1 || cfg.H < 1) {
      throw std::invalid_argument("ModelConfig: K and H must be positive");
    }
    if (cfg.variant == Variant::kADclm && cfg.A < 1) {
      throw std::invalid_argument("ModelConfig: A must be positive for the attentional variant");
    }
  }

  void check_context(const DocContext& ctx) const {
    if (ctx.variant != cfg_.variant) {
      throw std::invalid_argument("score_sentence: context built for variant '" +
                                  std::string(variant_name(ctx.variant)) + "', model is '" +
                                  variant_name(cfg_.variant) + "'");
    }
    switch (cfg_.variant) {
      case Variant::kRnnlm:
        break;
      case Variant::kDrnnlm:
        if (!ctx.state || ctx.state->layers.size() != lstm_.size()) {
          throw std::invalid_argument("score_sentence: missing carried LSTM state");
        }
        break;
      case Variant::kCcDclm:
      case Variant::kCoDclm:
        if (ctx.context < 0) {
          throw std::invalid_argument("score_sentence: missing context vector");
        }
        break;
      case Variant::kADclm:
        if (ctx.prev_hiddens.empty()) {
          throw std::invalid_argument("score_sentence: missing previous-sentence hiddens");
        }
        break;
    }
  }

  static void check_document(const EncodedDocument& doc) {
    if (doc.sentences.empty()) {
      throw std::invalid_argument("document must contain at least one sentence");
    }
    for (const Sentence& s : doc.sentences) {
      if (s.empty()) {
        throw std::invalid_argument("document contains an empty sentence");
      }
    }
  }
};

}  // namespace dclm

#endif  // DCLM_MODEL_HPP
