#ifndef DCLM_TESTS_FIXTURES_HPP
#define DCLM_TESTS_FIXTURES_HPP

#include <string>
#include <vector>

#include "dclm/dclm.hpp"

namespace dclm::test {

// Two encoded documents over a V=20 vocabulary (content ids 3..19), three
// sentences each; small enough for finite-difference sweeps.
inline std::vector<EncodedDocument> tiny_docs_v20() {
  std::vector<EncodedDocument> docs(2);
  docs[0].sentences = {{5, 7, 9}, {3, 4}, {10, 11, 12, 13}};
  docs[1].sentences = {{14, 15}, {16, 17, 18}, {19, 6, 8}};
  return docs;
}

// Deterministic memorization corpus: 5 documents x 5 sentences x 6 tokens
// over 27 content words (vocabulary size 30 with the specials). There are
// five sentence types; document d opens with type d and the types then
// rotate, so the only irreducible surprise is one 5-way choice per sentence
// for a sentence-level model, and per document for a document-level one.
inline std::vector<RawDocument> overfit_corpus_raw() {
  const auto type_word = [](int type, int pos) {
    return "w" + std::to_string((type * 6 + pos) % 27);
  };
  std::vector<RawDocument> docs;
  for (int d = 0; d < 5; ++d) {
    RawDocument doc;
    for (int s = 0; s < 5; ++s) {
      const int type = (d + s) % 5;
      RawSentence sent;
      for (int p = 0; p < 6; ++p) sent.push_back(type_word(type, p));
      doc.sentences.push_back(sent);
    }
    docs.push_back(doc);
  }
  return docs;
}

struct OverfitFixture {
  Vocabulary vocab;
  std::vector<EncodedDocument> docs;
};

inline OverfitFixture overfit_corpus() {
  OverfitFixture fx;
  const std::vector<RawDocument> raw = overfit_corpus_raw();
  fx.vocab = build_vocab(raw, 27);
  fx.docs = encode_corpus(raw, fx.vocab);
  return fx;
}

// The chained synthetic setting used for the cross-sentence experiments:
// 5 topics x 5 words, 5 sentences x 6 words per document.
inline SyntheticSpec chained_spec(int n_docs) {
  SyntheticSpec spec;
  spec.n_docs = n_docs;
  spec.sents_per_doc = 5;
  spec.words_per_sent = 6;
  spec.n_topics = 5;
  spec.words_per_topic = 5;
  spec.dependency = TopicDependency::kChained;
  return spec;
}

}  // namespace dclm::test

#endif  // DCLM_TESTS_FIXTURES_HPP
