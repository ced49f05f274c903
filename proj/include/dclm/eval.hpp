#ifndef DCLM_EVAL_HPP
#define DCLM_EVAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "dclm/corpus.hpp"
#include "dclm/model.hpp"
#include "dclm/rng.hpp"

namespace dclm {

struct CorpusLikelihood {
  double log_likelihood = 0.0;
  long long tokens = 0;

  double mean_log_likelihood() const {
    return tokens == 0 ? 0.0 : log_likelihood / static_cast<double>(tokens);
  }

  double perplexity() const { return std::exp(-mean_log_likelihood()); }
};

inline CorpusLikelihood corpus_log_likelihood(const Model& model,
                                              const std::vector<EncodedDocument>& docs) {
  if (docs.empty()) {
    throw std::invalid_argument("corpus_log_likelihood: empty corpus");
  }
  CorpusLikelihood acc;
  for (const EncodedDocument& d : docs) {
    DocScore s = model.document_log_likelihood(d);
    acc.log_likelihood += s.log_likelihood;
    acc.tokens += s.tokens;
  }
  return acc;
}

// exp(-(sum log-likelihood) / (sum predicted tokens)), natural log. Predicted
// tokens are content words plus one END per sentence; START is never counted.
inline double perplexity(const Model& model, const std::vector<EncodedDocument>& docs) {
  return corpus_log_likelihood(model, docs).perplexity();
}

// Uniform random permutation of the sentences, re-drawn until it differs
// from the identity. Documents with fewer than two sentences have no
// distinct shuffle and are rejected.
inline EncodedDocument shuffle_document(const EncodedDocument& doc, Rng& rng) {
  const std::size_t n = doc.sentences.size();
  if (n < 2) {
    throw std::invalid_argument("shuffle_document: need at least two sentences");
  }
  std::vector<std::size_t> perm(n);
  bool identity = true;
  do {
    std::iota(perm.begin(), perm.end(), 0);
    fisher_yates(perm, rng);
    identity = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (perm[i] != i) {
        identity = false;
        break;
      }
    }
  } while (identity);
  EncodedDocument out;
  out.sentences.reserve(n);
  for (std::size_t i : perm) out.sentences.push_back(doc.sentences[i]);
  return out;
}

enum class PairOutcome { kCorrect, kIncorrect, kTie };

// Correct iff the original document is strictly more likely than its
// shuffled copy; exact equality is a tie (scored as incorrect downstream).
inline PairOutcome coherence_pair(const Model& model, const EncodedDocument& original,
                                  const EncodedDocument& shuffled) {
  auto sorted_sentences = [](const EncodedDocument& d) {
    std::vector<Sentence> s = d.sentences;
    std::sort(s.begin(), s.end());
    return s;
  };
  if (sorted_sentences(original) != sorted_sentences(shuffled)) {
    throw std::invalid_argument("coherence_pair: documents are not sentence permutations");
  }
  const double lo = model.document_log_likelihood(original).log_likelihood;
  const double ls = model.document_log_likelihood(shuffled).log_likelihood;
  if (lo == ls) return PairOutcome::kTie;
  return lo > ls ? PairOutcome::kCorrect : PairOutcome::kIncorrect;
}

struct BootstrapResult {
  std::vector<double> accuracies;  // one per resampled test set
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation over sets
  long long ties = 0;   // total ties across all sets
};

// Decides one original-vs-shuffled pair; the rng is the per-set stream, for
// judges that need randomness (e.g. a coin-flip baseline).
using PairJudge =
    std::function<PairOutcome(const EncodedDocument& original, const EncodedDocument& shuffled, Rng& rng)>;

// Bootstrap over resampled test sets: each set draws |docs| documents with
// replacement, pairs each with a fresh shuffle, and scores the fraction
// judged correctly (ties count as incorrect). Set i uses an rng stream
// seeded from (seed, i), so results do not depend on evaluation order.
inline BootstrapResult bootstrap_coherence(const PairJudge& judge,
                                           const std::vector<EncodedDocument>& docs, int n_sets,
                                           std::uint64_t seed) {
  if (docs.empty()) {
    throw std::invalid_argument("bootstrap_coherence: empty test set");
  }
  if (n_sets < 1) {
    throw std::invalid_argument("bootstrap_coherence: need at least one resample");
  }
  for (const EncodedDocument& d : docs) {
    if (d.sentences.size() < 2) {
      throw std::invalid_argument(
          "bootstrap_coherence: every document needs at least two sentences");
    }
  }
  BootstrapResult res;
  res.accuracies.reserve(static_cast<std::size_t>(n_sets));
  for (int set = 0; set < n_sets; ++set) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(set)));
    long long correct = 0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const EncodedDocument& d = docs[uniform_index(rng, docs.size())];
      const EncodedDocument shuffled = shuffle_document(d, rng);
      switch (judge(d, shuffled, rng)) {
        case PairOutcome::kCorrect:
          ++correct;
          break;
        case PairOutcome::kTie:
          ++res.ties;
          break;
        case PairOutcome::kIncorrect:
          break;
      }
    }
    res.accuracies.push_back(static_cast<double>(correct) / static_cast<double>(docs.size()));
  }
  double sum = 0.0;
  for (double a : res.accuracies) sum += a;
  res.mean = sum / static_cast<double>(res.accuracies.size());
  if (res.accuracies.size() > 1) {
    double sq = 0.0;
    for (double a : res.accuracies) sq += (a - res.mean) * (a - res.mean);
    res.stddev = std::sqrt(sq / static_cast<double>(res.accuracies.size() - 1));
  }
  return res;
}

inline BootstrapResult bootstrap_coherence(const Model& model,
                                           const std::vector<EncodedDocument>& docs, int n_sets,
                                           std::uint64_t seed) {
  PairJudge judge = [&model](const EncodedDocument& original, const EncodedDocument& shuffled,
                             Rng&) { return coherence_pair(model, original, shuffled); };
  return bootstrap_coherence(judge, docs, n_sets, seed);
}

struct ZTestResult {
  double z = 0.0;
  double p_one_sided = 0.0;  // P(a <= b) under the null, i.e. 1 - Phi(z)
};

// Two-sample one-sided z-test over bootstrap accuracy samples.
inline ZTestResult z_test(const BootstrapResult& a, const BootstrapResult& b) {
  const std::size_t n = a.accuracies.size();
  if (n != b.accuracies.size()) {
    throw std::invalid_argument("z_test: resample counts differ");
  }
  if (n == 0) {
    throw std::invalid_argument("z_test: empty samples");
  }
  const double var = (a.stddev * a.stddev + b.stddev * b.stddev) / static_cast<double>(n);
  if (var == 0.0) {
    throw std::domain_error(
        "z_test: zero pooled variance, statistic undefined (constant bootstrap samples)");
  }
  ZTestResult r;
  r.z = (a.mean - b.mean) / std::sqrt(var);
  r.p_one_sided = 0.5 * std::erfc(r.z / std::sqrt(2.0));
  return r;
}

// A judge that ignores the documents and flips a fair coin; the random
// baseline for the pairwise task.
inline PairJudge coin_flip_judge() {
  return [](const EncodedDocument&, const EncodedDocument&, Rng& rng) {
    return uniform01(rng) < 0.5 ? PairOutcome::kCorrect : PairOutcome::kIncorrect;
  };
}

// A judge that always picks the original; for harness checks.
inline PairJudge always_correct_judge() {
  return [](const EncodedDocument&, const EncodedDocument&, Rng&) { return PairOutcome::kCorrect; };
}

}  // namespace dclm

#endif  // DCLM_EVAL_HPP
