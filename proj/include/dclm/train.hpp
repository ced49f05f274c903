#ifndef DCLM_TRAIN_HPP
#define DCLM_TRAIN_HPP

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dclm/corpus.hpp"
#include "dclm/eval.hpp"
#include "dclm/model.hpp"
#include "dclm/nn.hpp"

namespace dclm {

struct TrainConfig {
  int L = 5;            // segment length used to prepare the corpus
  double lambda = 0.1;  // AdaGrad initial learning rate
  double tau = 5.0;     // gradient norm threshold
  int epochs = 1;
  std::uint64_t seed = 1;
  int eval_every = 0;  // updates between dev evaluations; 0 = each epoch end
  double stop_below_dev_perplexity = 0.0;  // early stop once reached; 0 disables

  void validate() const {
    if (L < 1) throw std::invalid_argument("TrainConfig: L must be at least 1");
    if (lambda <= 0.0 || tau <= 0.0) {
      throw std::invalid_argument("TrainConfig: lambda and tau must be positive");
    }
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be at least 1");
    if (eval_every < 0) throw std::invalid_argument("TrainConfig: eval_every must be >= 0");
  }
};

struct HistoryPoint {
  long long updates = 0;
  double dev_mean_log_likelihood = 0.0;
  double dev_perplexity = 0.0;
  double wall_seconds = 0.0;
};

struct TrainHistory {
  std::vector<HistoryPoint> points;
};

struct TrainResult {
  Model best;  // parameters at the lowest dev perplexity seen
  TrainHistory history;
  double best_dev_perplexity = std::numeric_limits<double>::infinity();
  long long best_updates = 0;
  long long total_updates = 0;
};

// One gradient update per segment: forward the whole segment, sum the token
// losses, backward once, clip by global norm, AdaGrad step. Segment order is
// reshuffled each epoch from the seeded stream. `model` is left in its final
// state; the returned best model is the lowest-dev-perplexity snapshot.
inline TrainResult train(Model& model, const std::vector<EncodedDocument>& train_segments,
                         const std::vector<EncodedDocument>& dev_docs, const TrainConfig& cfg) {
  cfg.validate();
  if (train_segments.empty() || dev_docs.empty()) {
    throw std::invalid_argument("train: empty corpora");
  }
  model.trained_segment_length = cfg.L;
  model.trained_seed = cfg.seed;

  ParamStore& store = model.params();
  OptimizerState opt(store, cfg.lambda, cfg.tau);
  store.zero_grads();

  Rng shuffle_rng(cfg.seed);
  std::vector<std::size_t> order(train_segments.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result{model, TrainHistory{}, std::numeric_limits<double>::infinity(), 0, 0};
  std::vector<Tensor> best_values;
  const auto t0 = std::chrono::steady_clock::now();

  long long updates = 0;
  auto evaluate = [&]() {
    if (!result.history.points.empty() && result.history.points.back().updates == updates) {
      return;
    }
    const CorpusLikelihood dev = corpus_log_likelihood(model, dev_docs);
    HistoryPoint pt;
    pt.updates = updates;
    pt.dev_mean_log_likelihood = dev.mean_log_likelihood();
    pt.dev_perplexity = dev.perplexity();
    pt.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.points.push_back(pt);
    if (pt.dev_perplexity < result.best_dev_perplexity) {
      result.best_dev_perplexity = pt.dev_perplexity;
      result.best_updates = updates;
      best_values.clear();
      for (const ParamTensor& p : store) best_values.push_back(p.value);
    }
  };

  bool stop = false;
  for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    fisher_yates(order, shuffle_rng);
    for (std::size_t idx : order) {
      Graph g;
      const int loss = model.build_document_loss(g, train_segments[idx]);
      g.backward(loss);
      clip_gradients(store, cfg.tau);
      adagrad_update(store, opt);
      store.zero_grads();
      ++updates;
      if (cfg.eval_every > 0 && updates % cfg.eval_every == 0) {
        evaluate();
      }
    }
    if (cfg.eval_every == 0) evaluate();
    if (cfg.stop_below_dev_perplexity > 0.0 &&
        result.best_dev_perplexity < cfg.stop_below_dev_perplexity) {
      stop = true;
    }
  }
  evaluate();
  result.total_updates = updates;

  result.best = model;
  for (std::size_t i = 0; i < best_values.size(); ++i) {
    result.best.params()[i].value = best_values[i];
  }
  return result;
}

struct GridCell {
  int K = 0;
  int H = 0;
  double dev_perplexity = 0.0;
};

struct GridSearchResult {
  std::vector<GridCell> cells;
  int best_index = -1;
};

// Lowest dev perplexity wins; ties prefer the smaller H, then the smaller K.
inline int pick_best_cell(std::span<const GridCell> cells) {
  if (cells.empty()) {
    throw std::invalid_argument("pick_best_cell: empty grid");
  }
  int best = 0;
  for (int i = 1; i < static_cast<int>(cells.size()); ++i) {
    const GridCell& c = cells[static_cast<std::size_t>(i)];
    const GridCell& b = cells[static_cast<std::size_t>(best)];
    if (c.dev_perplexity < b.dev_perplexity ||
        (c.dev_perplexity == b.dev_perplexity &&
         (c.H < b.H || (c.H == b.H && c.K < b.K)))) {
      best = i;
    }
  }
  return best;
}

// Exhaustive search over the (K, H) cross product; every cell trains a fresh
// model from the same seed.
inline GridSearchResult grid_search(Variant variant, int V, int A,
                                    const std::vector<EncodedDocument>& train_segments,
                                    const std::vector<EncodedDocument>& dev_docs,
                                    std::span<const int> Ks, std::span<const int> Hs,
                                    const TrainConfig& cfg) {
  if (Ks.empty() || Hs.empty()) {
    throw std::invalid_argument("grid_search: empty grid");
  }
  GridSearchResult res;
  for (int K : Ks) {
    for (int H : Hs) {
      Rng rng(cfg.seed);
      Model model(ModelConfig{variant, V, K, H, A}, rng);
      TrainResult tr = train(model, train_segments, dev_docs, cfg);
      res.cells.push_back(GridCell{K, H, tr.best_dev_perplexity});
    }
  }
  res.best_index = pick_best_cell(res.cells);
  return res;
}

// ---------------------------------------------------------------------------
// Checkpoints.
//
// Layout: the magic line "DCLM1\n"; one header line
// "variant V K H A L seed\n"; then for every tensor in canonical
// (registration) order one line "name rows cols\n" followed by rows*cols
// little-endian IEEE-754 doubles.

namespace detail {

inline constexpr char kCheckpointMagic[] = "DCLM1";

inline std::uint64_t byteswap64(std::uint64_t x) {
  x = (x & 0x00000000ffffffffULL) << 32 | (x & 0xffffffff00000000ULL) >> 32;
  x = (x & 0x0000ffff0000ffffULL) << 16 | (x & 0xffff0000ffff0000ULL) >> 16;
  x = (x & 0x00ff00ff00ff00ffULL) << 8 | (x & 0xff00ff00ff00ff00ULL) >> 8;
  return x;
}

inline void write_doubles_le(std::ostream& out, const double* xs, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(xs), static_cast<std::streamsize>(n * sizeof(double)));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t bits = byteswap64(std::bit_cast<std::uint64_t>(xs[i]));
      out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
  }
}

inline void read_doubles_le(std::istream& in, double* xs, std::size_t n, const std::string& path) {
  in.read(reinterpret_cast<char*>(xs), static_cast<std::streamsize>(n * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != n * sizeof(double)) {
    throw std::runtime_error("checkpoint truncated: " + path);
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = std::bit_cast<double>(byteswap64(std::bit_cast<std::uint64_t>(xs[i])));
    }
  }
}

}  // namespace detail

inline void save_checkpoint(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open checkpoint for writing: " + path);
  }
  const ModelConfig& cfg = model.config();
  out << detail::kCheckpointMagic << "\n";
  out << variant_name(cfg.variant) << " " << cfg.V << " " << cfg.K << " " << cfg.H << " " << cfg.A
      << " " << model.trained_segment_length << " " << model.trained_seed << "\n";
  for (const ParamTensor& p : model.params()) {
    out << p.name << " " << p.value.rows << " " << p.value.cols << "\n";
    detail::write_doubles_le(out, p.value.data.data(), p.value.data.size());
  }
  if (!out) {
    throw std::runtime_error("failed while writing checkpoint: " + path);
  }
}

inline Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open checkpoint: " + path);
  }
  std::string line;
  if (!std::getline(in, line) || line != detail::kCheckpointMagic) {
    throw std::runtime_error("not a recognized checkpoint (bad magic): " + path);
  }
  if (!std::getline(in, line)) {
    throw std::runtime_error("checkpoint truncated: " + path);
  }
  std::istringstream header(line);
  std::string variant_str;
  ModelConfig cfg;
  int L = 0;
  std::uint64_t seed = 0;
  if (!(header >> variant_str >> cfg.V >> cfg.K >> cfg.H >> cfg.A >> L >> seed)) {
    throw std::runtime_error("malformed checkpoint header: " + path);
  }
  cfg.variant = parse_variant(variant_str);

  Rng scratch(0);
  Model model(cfg, scratch);
  model.trained_segment_length = L;
  model.trained_seed = seed;
  for (ParamTensor& p : model.params()) {
    if (!std::getline(in, line)) {
      throw std::runtime_error("checkpoint truncated: " + path);
    }
    std::istringstream ts(line);
    std::string name;
    int rows = 0, cols = 0;
    if (!(ts >> name >> rows >> cols) || name != p.name || rows != p.value.rows ||
        cols != p.value.cols) {
      throw std::runtime_error("checkpoint tensor mismatch at '" + p.name + "': " + path);
    }
    detail::read_doubles_le(in, p.value.data.data(), p.value.data.size(), path);
    if (!p.value.all_finite()) {
      throw std::runtime_error("checkpoint tensor '" + p.name + "' has non-finite values: " +
                               path);
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error("trailing bytes after checkpoint payload: " + path);
  }
  return model;
}

// Two-column plot data: update count and mean per-token dev log-likelihood.
inline void emit_history_plot_data(const TrainHistory& history, std::ostream& out,
                                   const std::string& header_comment = "") {
  if (history.points.empty()) {
    throw std::invalid_argument("emit_history_plot_data: empty history");
  }
  std::vector<HistoryPoint> pts = history.points;
  std::sort(pts.begin(), pts.end(),
            [](const HistoryPoint& a, const HistoryPoint& b) { return a.updates < b.updates; });
  if (!header_comment.empty()) {
    out << "# " << header_comment << "\n";
  }
  out << "updates\tmean_log_likelihood\n";
  char buf[64];
  for (const HistoryPoint& p : pts) {
    std::snprintf(buf, sizeof(buf), "%.17g", p.dev_mean_log_likelihood);
    out << p.updates << "\t" << buf << "\n";
  }
}

}  // namespace dclm

#endif  // DCLM_TRAIN_HPP
