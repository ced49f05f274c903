#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "dclm/dclm.hpp"
#include "fixtures.hpp"

using namespace dclm;

namespace {

Model make_model(Variant v, int V = 12, int K = 3, int H = 4, std::uint64_t seed = 55) {
  Rng rng(seed);
  return Model(ModelConfig{v, V, K, H, 3}, rng);
}

std::vector<EncodedDocument> random_docs(int n, int max_sentences, Rng& rng, int V = 12) {
  std::vector<EncodedDocument> docs;
  for (int d = 0; d < n; ++d) {
    EncodedDocument doc;
    const int sents = 2 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(max_sentences - 1)));
    for (int s = 0; s < sents; ++s) {
      Sentence sent;
      const int len = 1 + static_cast<int>(uniform_index(rng, 4));
      for (int i = 0; i < len; ++i) {
        sent.push_back(3 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(V - 3))));
      }
      doc.sentences.push_back(sent);
    }
    docs.push_back(doc);
  }
  return docs;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("forced-uniform perplexity is exactly the vocabulary size") {
  Rng rng(1);
  const auto docs = random_docs(4, 4, rng);
  for (Variant v : {Variant::kRnnlm, Variant::kCcDclm, Variant::kADclm}) {
    Model m = make_model(v);
    m.force_uniform = true;
    CHECK(perplexity(m, docs) == doctest::Approx(12.0).epsilon(1e-12));
  }
  Model m = make_model(Variant::kRnnlm);
  CHECK_THROWS_AS(perplexity(m, {}), std::invalid_argument);
}

TEST_CASE("perplexity approaches 1 on a memorized deterministic corpus") {
  // one document, one sentence, repeated token
  std::vector<EncodedDocument> docs(1);
  docs[0].sentences = {{3, 3, 3, 3}};
  Rng rng(2);
  Model m(ModelConfig{Variant::kRnnlm, 4, 6, 8, 48}, rng);
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.seed = 3;
  cfg.stop_below_dev_perplexity = 1.05;
  const TrainResult res = train(m, docs, docs, cfg);
  const double ppl = perplexity(res.best, docs);
  CHECK(ppl >= 1.0);
  CHECK(ppl < 1.1);
}

TEST_CASE("perplexity is invariant to segmentation for the sentence-level model") {
  Rng rng(3);
  const auto docs = random_docs(5, 6, rng);
  Model m = make_model(Variant::kRnnlm);
  const double whole = perplexity(m, docs);
  for (int L : {1, 2, 3, 7}) {
    const double segmented = perplexity(m, segment_corpus(docs, L));
    CHECK(segmented == doctest::Approx(whole).epsilon(1e-12));
  }
}

TEST_CASE("shuffle_document basics") {
  EncodedDocument two;
  two.sentences = {{3, 4}, {5}};
  Rng rng(4);
  for (int i = 0; i < 10; ++i) {
    const EncodedDocument s = shuffle_document(two, rng);
    CHECK(s.sentences[0] == two.sentences[1]);
    CHECK(s.sentences[1] == two.sentences[0]);
  }

  EncodedDocument one;
  one.sentences = {{3}};
  CHECK_THROWS_AS(shuffle_document(one, rng), std::invalid_argument);

  // multiset preserved, identity never returned
  Rng rng2(5);
  const auto docs = random_docs(10, 6, rng2);
  for (const EncodedDocument& d : docs) {
    const EncodedDocument s = shuffle_document(d, rng2);
    CHECK(s.sentences != d.sentences);
    auto a = d.sentences;
    auto b = s.sentences;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }
}

TEST_CASE("shuffle_document draws non-identity permutations uniformly") {
  EncodedDocument doc;
  doc.sentences = {{3}, {4}, {5}};
  Rng rng(6);
  std::map<std::vector<int>, int> counts;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    const EncodedDocument s = shuffle_document(doc, rng);
    std::vector<int> perm;
    for (const Sentence& sent : s.sentences) perm.push_back(sent[0]);
    ++counts[perm];
  }
  CHECK(counts.size() == 5);  // 3! - 1 non-identity permutations
  for (const auto& [perm, count] : counts) {
    const double frac = static_cast<double>(count) / trials;
    CHECK(frac > 0.18);
    CHECK(frac < 0.22);
  }
}

TEST_CASE("coherence_pair ties exactly for the order-invariant model") {
  Model m = make_model(Variant::kRnnlm);
  Rng rng(7);
  const auto docs = random_docs(6, 5, rng);
  for (const EncodedDocument& d : docs) {
    const EncodedDocument s = shuffle_document(d, rng);
    CHECK(coherence_pair(m, d, s) == PairOutcome::kTie);
  }

  // context models are not order-invariant: no ties on generic documents
  Model cc = make_model(Variant::kCcDclm);
  int decisive = 0;
  for (const EncodedDocument& d : docs) {
    const EncodedDocument s = shuffle_document(d, rng);
    if (coherence_pair(cc, d, s) != PairOutcome::kTie) ++decisive;
  }
  CHECK(decisive == 6);

  EncodedDocument other;
  other.sentences = {{3, 3}, {4}};
  CHECK_THROWS_AS(coherence_pair(m, docs[0], other), std::invalid_argument);
}

TEST_CASE("bootstrap harness: always-correct judge scores mean 1, std 0") {
  Rng rng(8);
  const auto docs = random_docs(12, 4, rng);
  const BootstrapResult res = bootstrap_coherence(always_correct_judge(), docs, 1000, 42);
  CHECK(res.accuracies.size() == 1000);
  CHECK(res.mean == 1.0);
  CHECK(res.stddev == 0.0);
  CHECK(res.ties == 0);
}

TEST_CASE("bootstrap harness: seeded fair coin over 155 docs and 1000 sets") {
  std::vector<EncodedDocument> docs(155);
  for (auto& d : docs) d.sentences = {{3, 4}, {5, 6}};
  const BootstrapResult res = bootstrap_coherence(coin_flip_judge(), docs, 1000, 2024);
  CHECK(res.mean > 0.485);
  CHECK(res.mean < 0.515);
  // per-set std of a fair coin over 155 pairs is about 0.04
  CHECK(res.stddev > 0.02);
  CHECK(res.stddev < 0.06);

  // mean is the mean of the per-set accuracies
  double s = 0.0;
  for (double a : res.accuracies) s += a;
  CHECK(res.mean == doctest::Approx(s / 1000.0).epsilon(1e-15));
}

TEST_CASE("bootstrap rejects unusable inputs") {
  Rng rng(9);
  auto docs = random_docs(5, 4, rng);
  CHECK_THROWS_AS(bootstrap_coherence(always_correct_judge(), docs, 0, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(bootstrap_coherence(always_correct_judge(), {}, 10, 1), std::invalid_argument);
  docs.push_back(EncodedDocument{});
  docs.back().sentences = {{3}};
  CHECK_THROWS_AS(bootstrap_coherence(always_correct_judge(), docs, 10, 1),
                  std::invalid_argument);
}

TEST_CASE("order-invariant model scores exactly zero accuracy (all ties)") {
  Model m = make_model(Variant::kRnnlm);
  Rng rng(10);
  const auto docs = random_docs(8, 4, rng);
  const BootstrapResult res = bootstrap_coherence(m, docs, 20, 7);
  CHECK(res.mean == 0.0);
  CHECK(res.ties == 20 * 8);
}

TEST_CASE("bootstrap results are schedule-independent by seed derivation") {
  Rng rng(11);
  const auto docs = random_docs(10, 4, rng);
  const BootstrapResult a = bootstrap_coherence(coin_flip_judge(), docs, 50, 99);
  const BootstrapResult b = bootstrap_coherence(coin_flip_judge(), docs, 50, 99);
  CHECK(a.accuracies == b.accuracies);
  const BootstrapResult c = bootstrap_coherence(coin_flip_judge(), docs, 50, 100);
  CHECK(a.accuracies != c.accuracies);
}

TEST_CASE("z_test formula and edge cases") {
  SUBCASE("identical samples give z = 0, p = 0.5") {
    Rng rng(12);
    const auto docs = random_docs(10, 4, rng);
    const BootstrapResult a = bootstrap_coherence(coin_flip_judge(), docs, 40, 5);
    const ZTestResult r = z_test(a, a);
    CHECK(r.z == 0.0);
    CHECK(r.p_one_sided == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("zero pooled variance is an explicit error") {
    BootstrapResult a, b;
    a.accuracies.assign(100, 1.0);
    a.mean = 1.0;
    a.stddev = 0.0;
    b.accuracies.assign(100, 0.0);
    b.mean = 0.0;
    b.stddev = 0.0;
    CHECK_THROWS_AS(z_test(a, b), std::domain_error);
  }
  SUBCASE("mismatched resample counts are rejected") {
    BootstrapResult a, b;
    a.accuracies.assign(10, 0.5);
    b.accuracies.assign(20, 0.5);
    CHECK_THROWS_AS(z_test(a, b), std::invalid_argument);
  }
  SUBCASE("statistic matches a hand-computed value") {
    BootstrapResult a, b;
    a.accuracies.assign(1000, 0.0);
    a.mean = 0.83;
    a.stddev = 0.0377;
    b.accuracies.assign(1000, 0.0);
    b.mean = 0.7532;
    b.stddev = 0.0442;
    const ZTestResult r = z_test(a, b);
    CHECK(r.z == doctest::Approx(41.805).epsilon(1e-3));
    CHECK(r.p_one_sided < 1e-10);
  }
}

}  // TEST_SUITE
