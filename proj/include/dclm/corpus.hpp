#ifndef DCLM_CORPUS_HPP
#define DCLM_CORPUS_HPP

#include <algorithm>
#include <cmath>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dclm/rng.hpp"

namespace dclm {

using RawSentence = std::vector<std::string>;

struct RawDocument {
  std::vector<RawSentence> sentences;
};

using Sentence = std::vector<int>;

// Content token ids only; START/END are injected by the scoring code.
struct EncodedDocument {
  std::vector<Sentence> sentences;
};

// Token <-> id map with reserved ids for UNKNOWN, START and END. Content
// tokens follow the specials, ordered by frequency then spelling.
class Vocabulary {
 public:
  static constexpr int kUnknown = 0;
  static constexpr int kStart = 1;
  static constexpr int kEnd = 2;

  static const std::string& unknown_token() {
    static const std::string t = "<unk>";
    return t;
  }
  static const std::string& start_token() {
    static const std::string t = "<s>";
    return t;
  }
  static const std::string& end_token() {
    static const std::string t = "</s>";
    return t;
  }

  Vocabulary() {
    tokens_ = {unknown_token(), start_token(), end_token()};
    for (int i = 0; i < 3; ++i) ids_[tokens_[i]] = i;
  }

  int size() const { return static_cast<int>(tokens_.size()); }

  // Id used when encoding running text. Literal "<s>"/"</s>" map to UNKNOWN
  // so that encoded documents never contain the START/END ids.
  int encode_id(const std::string& token) const {
    if (token == start_token() || token == end_token()) return kUnknown;
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnknown : it->second;
  }

  bool contains(const std::string& token) const { return ids_.count(token) != 0; }

  const std::string& token(int id) const {
    if (id < 0 || id >= size()) {
      throw std::out_of_range("Vocabulary::token: id " + std::to_string(id));
    }
    return tokens_[static_cast<std::size_t>(id)];
  }

  void add(const std::string& token) {
    if (ids_.count(token)) {
      throw std::invalid_argument("Vocabulary::add: duplicate token '" + token + "'");
    }
    ids_[token] = size();
    tokens_.push_back(token);
  }

 private:
  std::unordered_map<std::string, int> ids_;
  std::vector<std::string> tokens_;
};

// One sentence per line, whitespace-tokenized; a blank line ends a document.
// Lines starting with '#' before the first sentence are provenance comments
// and are skipped.
inline std::vector<RawDocument> parse_corpus(std::istream& in) {
  std::vector<RawDocument> docs;
  RawDocument current;
  std::string line;
  bool seen_sentence = false;
  while (std::getline(in, line)) {
    if (!seen_sentence && !line.empty() && line[0] == '#') continue;
    RawSentence sent;
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) sent.push_back(tok);
    if (sent.empty()) {
      if (!current.sentences.empty()) {
        docs.push_back(std::move(current));
        current = RawDocument{};
      }
      continue;
    }
    seen_sentence = true;
    current.sentences.push_back(std::move(sent));
  }
  if (!current.sentences.empty()) docs.push_back(std::move(current));
  return docs;
}

// Keep the top_k most frequent training tokens (ties broken by spelling)
// plus the three specials. Reserved spellings in the text do not count as
// content candidates.
inline Vocabulary build_vocab(const std::vector<RawDocument>& train_docs, int top_k) {
  if (top_k < 1) {
    throw std::invalid_argument("build_vocab: top_k must be at least 1");
  }
  if (train_docs.empty()) {
    throw std::invalid_argument("build_vocab: empty training set");
  }
  std::unordered_map<std::string, long long> freq;
  for (const RawDocument& d : train_docs) {
    for (const RawSentence& s : d.sentences) {
      for (const std::string& t : s) {
        if (t == Vocabulary::unknown_token() || t == Vocabulary::start_token() ||
            t == Vocabulary::end_token()) {
          continue;
        }
        ++freq[t];
      }
    }
  }
  std::vector<std::pair<std::string, long long>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(ranked.size()) > top_k) ranked.resize(static_cast<std::size_t>(top_k));
  Vocabulary vocab;
  for (const auto& [token, count] : ranked) vocab.add(token);
  return vocab;
}

inline EncodedDocument encode_document(const RawDocument& doc, const Vocabulary& vocab) {
  EncodedDocument out;
  out.sentences.reserve(doc.sentences.size());
  for (const RawSentence& s : doc.sentences) {
    Sentence enc;
    enc.reserve(s.size());
    for (const std::string& t : s) enc.push_back(vocab.encode_id(t));
    out.sentences.push_back(std::move(enc));
  }
  return out;
}

inline std::vector<EncodedDocument> encode_corpus(const std::vector<RawDocument>& docs,
                                                  const Vocabulary& vocab) {
  std::vector<EncodedDocument> out;
  out.reserve(docs.size());
  for (const RawDocument& d : docs) out.push_back(encode_document(d, vocab));
  return out;
}

// Split into ceil(S/L) chunks of at most L sentences, order preserved.
inline std::vector<EncodedDocument> segment_document(const EncodedDocument& doc, int L) {
  if (L < 1) {
    throw std::invalid_argument("segment_document: L must be at least 1");
  }
  std::vector<EncodedDocument> segments;
  EncodedDocument seg;
  for (const Sentence& s : doc.sentences) {
    seg.sentences.push_back(s);
    if (static_cast<int>(seg.sentences.size()) == L) {
      segments.push_back(std::move(seg));
      seg = EncodedDocument{};
    }
  }
  if (!seg.sentences.empty()) segments.push_back(std::move(seg));
  return segments;
}

inline std::vector<EncodedDocument> segment_corpus(const std::vector<EncodedDocument>& docs,
                                                   int L) {
  std::vector<EncodedDocument> out;
  for (const EncodedDocument& d : docs) {
    for (EncodedDocument& seg : segment_document(d, L)) out.push_back(std::move(seg));
  }
  return out;
}

struct CorpusStats {
  long long documents = 0;
  double mean_tokens = 0.0;
  double mean_sentences = 0.0;
};

inline CorpusStats corpus_stats(const std::vector<RawDocument>& docs) {
  CorpusStats st;
  st.documents = static_cast<long long>(docs.size());
  if (docs.empty()) return st;
  long long tokens = 0;
  long long sentences = 0;
  for (const RawDocument& d : docs) {
    sentences += static_cast<long long>(d.sentences.size());
    for (const RawSentence& s : d.sentences) tokens += static_cast<long long>(s.size());
  }
  st.mean_tokens = static_cast<double>(tokens) / static_cast<double>(st.documents);
  st.mean_sentences = static_cast<double>(sentences) / static_cast<double>(st.documents);
  return st;
}

enum class TopicDependency { kChained, kIndependent };

struct SyntheticSpec {
  int n_docs = 1;
  int sents_per_doc = 1;
  int words_per_sent = 1;
  int n_topics = 1;
  int words_per_topic = 1;
  TopicDependency dependency = TopicDependency::kChained;
};

// A topic-structured corpus with known entropies. Each sentence draws its
// words uniformly from one topic's disjoint word set; under kChained the
// topic of sentence t is (topic of sentence t-1) + 1 mod n_topics, under
// kIndependent topics are i.i.d. uniform. Document-initial topics are
// uniform, so every sentence's topic is marginally uniform either way.
struct SyntheticCorpus {
  std::vector<RawDocument> docs;

  // Entropy of one word given its sentence's topic: ln(words_per_topic).
  double conditional_word_entropy = 0.0;
  // Entropy of one word with the topic unknown: ln(n_topics*words_per_topic).
  double marginal_word_entropy = 0.0;

  // Per-predicted-token entropies under this toolkit's scoring convention
  // (each sentence predicts its words plus one END; END position is
  // deterministic here, so it contributes zero entropy).
  //
  // full_context: the previous sentence is visible, so only a document's
  // first word has an unknown topic (chained corpora). sentence_isolated:
  // every sentence starts with an unknown topic. Independent corpora carry
  // no cross-sentence signal, so the two coincide.
  double full_context_entropy_per_token = 0.0;
  double sentence_isolated_entropy_per_token = 0.0;
};

inline std::string synthetic_word(int topic, int word) {
  return "t" + std::to_string(topic) + "w" + std::to_string(word);
}

inline SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec, Rng& rng) {
  if (spec.n_docs < 1 || spec.sents_per_doc < 1 || spec.words_per_sent < 1 ||
      spec.n_topics < 1 || spec.words_per_topic < 1) {
    throw std::invalid_argument("generate_synthetic_corpus: all counts must be at least 1");
  }
  SyntheticCorpus out;
  out.docs.reserve(static_cast<std::size_t>(spec.n_docs));
  for (int d = 0; d < spec.n_docs; ++d) {
    RawDocument doc;
    int topic = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(spec.n_topics)));
    for (int s = 0; s < spec.sents_per_doc; ++s) {
      if (s > 0) {
        topic = spec.dependency == TopicDependency::kChained
                    ? (topic + 1) % spec.n_topics
                    : static_cast<int>(
                          uniform_index(rng, static_cast<std::size_t>(spec.n_topics)));
      }
      RawSentence sent;
      sent.reserve(static_cast<std::size_t>(spec.words_per_sent));
      for (int w = 0; w < spec.words_per_sent; ++w) {
        const int pick =
            static_cast<int>(uniform_index(rng, static_cast<std::size_t>(spec.words_per_topic)));
        sent.push_back(synthetic_word(topic, pick));
      }
      doc.sentences.push_back(std::move(sent));
    }
    out.docs.push_back(std::move(doc));
  }

  const double lnW = std::log(static_cast<double>(spec.words_per_topic));
  const double lnTW = std::log(static_cast<double>(spec.n_topics) *
                               static_cast<double>(spec.words_per_topic));
  out.conditional_word_entropy = lnW;
  out.marginal_word_entropy = lnTW;

  const double S = spec.sents_per_doc;
  const double W = spec.words_per_sent;
  const double preds_per_doc = S * (W + 1.0);
  // A sentence whose topic is unknown costs lnTW for its first word (which
  // reveals the topic) and lnW for the rest; a known topic costs lnW per word.
  const double isolated_sentence = lnTW + (W - 1.0) * lnW;
  out.sentence_isolated_entropy_per_token = S * isolated_sentence / preds_per_doc;
  if (spec.dependency == TopicDependency::kChained) {
    out.full_context_entropy_per_token =
        (isolated_sentence + (S - 1.0) * W * lnW) / preds_per_doc;
  } else {
    out.full_context_entropy_per_token = out.sentence_isolated_entropy_per_token;
  }
  return out;
}

}  // namespace dclm

#endif  // DCLM_CORPUS_HPP
