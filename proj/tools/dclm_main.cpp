// dclm: document-context language modeling toolkit.
//
// Subcommands: stats, synth, train, ppl, coherence, gridsearch. All output
// files begin with a '#' comment header echoing the resolved flags and seed,
// so any result can be reproduced bit-exactly by re-running that line.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dclm/dclm.hpp"

namespace {

using namespace dclm;

// Shortest round-trip decimal form, so headers re-parse to the same double.
std::string fmt_flag(double x) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

// Metric formatting: 12 significant digits, stable across identical runs.
std::string fmt_metric(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return std::string(buf);
}

std::vector<RawDocument> read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open corpus file: " + path);
  }
  return parse_corpus(in);
}

// Contents are assembled in memory first; nothing is written on failure.
void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open output file: " + path);
  }
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) {
    throw std::runtime_error("failed while writing: " + path);
  }
}

void save_vocab(const Vocabulary& vocab, const std::string& path, const std::string& header) {
  std::ostringstream out;
  out << "# " << header << "\n";
  for (int i = 0; i < vocab.size(); ++i) out << vocab.token(i) << "\n";
  write_file(path, out.str());
}

Vocabulary load_vocab_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open vocabulary file: " + path);
  }
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (tokens.empty() && line.rfind("# ", 0) == 0) continue;  // provenance header
    if (line.empty()) continue;
    tokens.push_back(line);
  }
  if (tokens.size() < 3 || tokens[0] != Vocabulary::unknown_token() ||
      tokens[1] != Vocabulary::start_token() || tokens[2] != Vocabulary::end_token()) {
    throw std::runtime_error("not a recognized vocabulary file: " + path);
  }
  Vocabulary vocab;
  for (std::size_t i = 3; i < tokens.size(); ++i) vocab.add(tokens[i]);
  return vocab;
}

std::string default_vocab_path(const std::string& checkpoint) { return checkpoint + ".vocab"; }

struct LoadedModel {
  Model model;
  Vocabulary vocab;
};

LoadedModel load_model_and_vocab(const std::string& checkpoint, std::string vocab_path) {
  if (vocab_path.empty()) vocab_path = default_vocab_path(checkpoint);
  LoadedModel lm{load_checkpoint(checkpoint), load_vocab_file(vocab_path)};
  if (lm.vocab.size() != lm.model.config().V) {
    throw std::runtime_error("vocabulary size " + std::to_string(lm.vocab.size()) +
                             " does not match checkpoint V=" +
                             std::to_string(lm.model.config().V) + ": " + vocab_path);
  }
  return lm;
}

// ---------------------------------------------------------------------------
// Option bags.

struct StatsOpts {
  std::string corpus;
  std::string out;
};

struct SynthOpts {
  std::string out;
  int docs = 200;
  int sentences = 5;
  int words = 6;
  int topics = 5;
  int topic_words = 5;
  std::string dependency = "chained";
  std::uint64_t seed = 1;
};

struct TrainOpts {
  std::string corpus;
  std::string dev;
  std::string checkpoint;
  std::string out;
  std::string variant = "ccdclm";
  int K = 32;
  int H = 48;
  int A = 48;
  int L = 5;
  double lambda = 0.1;
  double tau = 5.0;
  int epochs = 1;
  int eval_every = 0;
  int top_k = 10000;
  std::uint64_t seed = 1;
};

struct PplOpts {
  std::string corpus;
  std::string checkpoint;
  std::string vocab;
  std::string out;
  bool force_uniform = false;
};

struct CoherenceOpts {
  std::string corpus;
  std::string checkpoint;
  std::string baseline_checkpoint;
  std::string vocab;
  std::string baseline_vocab;
  std::string out;
  int bootstrap_sets = 1000;
  std::uint64_t seed = 1;
};

struct GridOpts {
  std::string corpus;
  std::string dev;
  std::string out;
  std::string variant = "ccdclm";
  std::vector<int> Ks = {32, 48, 64, 96, 128, 256};
  std::vector<int> Hs = {32, 48, 64, 96, 128, 256};
  int A = 48;
  int L = 5;
  double lambda = 0.1;
  double tau = 5.0;
  int epochs = 1;
  int top_k = 10000;
  std::uint64_t seed = 1;
};

// ---------------------------------------------------------------------------
// Commands.

int run_stats(const StatsOpts& o) {
  const auto docs = read_corpus_file(o.corpus);
  const CorpusStats st = corpus_stats(docs);
  std::cout << "corpus statistics for " << o.corpus << "\n"
            << "  documents            " << st.documents << "\n"
            << "  mean tokens/doc      " << fmt_metric(st.mean_tokens) << "\n"
            << "  mean sentences/doc   " << fmt_metric(st.mean_sentences) << "\n";
  std::ostringstream kv;
  kv << "documents=" << st.documents << "\n"
     << "mean_tokens=" << fmt_metric(st.mean_tokens) << "\n"
     << "mean_sentences=" << fmt_metric(st.mean_sentences) << "\n";
  std::cout << kv.str();
  if (!o.out.empty()) {
    write_file(o.out, "# dclm stats --corpus " + o.corpus + "\n" + kv.str());
  }
  return 0;
}

std::string synth_header(const SynthOpts& o) {
  std::ostringstream h;
  h << "dclm synth --out " << o.out << " --docs " << o.docs << " --sentences " << o.sentences
    << " --words " << o.words << " --topics " << o.topics << " --topic-words " << o.topic_words
    << " --dependency " << o.dependency << " --seed " << o.seed;
  return h.str();
}

int run_synth(const SynthOpts& o) {
  SyntheticSpec spec;
  spec.n_docs = o.docs;
  spec.sents_per_doc = o.sentences;
  spec.words_per_sent = o.words;
  spec.n_topics = o.topics;
  spec.words_per_topic = o.topic_words;
  if (o.dependency == "chained") {
    spec.dependency = TopicDependency::kChained;
  } else if (o.dependency == "independent") {
    spec.dependency = TopicDependency::kIndependent;
  } else {
    throw std::runtime_error("--dependency must be 'chained' or 'independent'");
  }
  Rng rng(o.seed);
  const SyntheticCorpus corpus = generate_synthetic_corpus(spec, rng);

  std::ostringstream kv;
  kv << "conditional_word_entropy=" << fmt_metric(corpus.conditional_word_entropy) << "\n"
     << "marginal_word_entropy=" << fmt_metric(corpus.marginal_word_entropy) << "\n"
     << "full_context_entropy_per_token=" << fmt_metric(corpus.full_context_entropy_per_token)
     << "\n"
     << "sentence_isolated_entropy_per_token="
     << fmt_metric(corpus.sentence_isolated_entropy_per_token) << "\n";

  std::ostringstream out;
  out << "# " << synth_header(o) << "\n";
  std::istringstream kvlines(kv.str());
  std::string line;
  while (std::getline(kvlines, line)) out << "# oracle " << line << "\n";
  for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
    if (d > 0) out << "\n";
    for (const RawSentence& s : corpus.docs[d].sentences) {
      for (std::size_t w = 0; w < s.size(); ++w) {
        if (w > 0) out << ' ';
        out << s[w];
      }
      out << "\n";
    }
  }
  write_file(o.out, out.str());
  std::cout << "wrote " << corpus.docs.size() << " documents to " << o.out << "\n" << kv.str();
  return 0;
}

std::string train_header(const TrainOpts& o) {
  std::ostringstream h;
  h << "dclm train --corpus " << o.corpus << " --dev " << o.dev << " --variant " << o.variant
    << " --K " << o.K << " --H " << o.H << " --A " << o.A << " --L " << o.L << " --lambda "
    << fmt_flag(o.lambda) << " --tau " << fmt_flag(o.tau) << " --epochs " << o.epochs
    << " --eval-every " << o.eval_every << " --top-k " << o.top_k << " --seed " << o.seed
    << " --checkpoint " << o.checkpoint;
  if (!o.out.empty()) h << " --out " << o.out;
  return h.str();
}

int run_train(const TrainOpts& o) {
  const auto train_raw = read_corpus_file(o.corpus);
  const auto dev_raw = read_corpus_file(o.dev);
  if (train_raw.empty()) {
    throw std::runtime_error("training corpus is empty: " + o.corpus);
  }
  if (dev_raw.empty()) {
    throw std::runtime_error("development corpus is empty: " + o.dev);
  }
  const Vocabulary vocab = build_vocab(train_raw, o.top_k);
  const auto train_docs = encode_corpus(train_raw, vocab);
  const auto dev_docs = encode_corpus(dev_raw, vocab);
  const auto segments = segment_corpus(train_docs, o.L);

  Rng rng(o.seed);
  Model model(ModelConfig{parse_variant(o.variant), vocab.size(), o.K, o.H, o.A}, rng);

  TrainConfig cfg;
  cfg.L = o.L;
  cfg.lambda = o.lambda;
  cfg.tau = o.tau;
  cfg.epochs = o.epochs;
  cfg.seed = o.seed;
  cfg.eval_every = o.eval_every;

  TrainResult res = train(model, segments, dev_docs, cfg);

  save_checkpoint(res.best, o.checkpoint);
  save_vocab(vocab, default_vocab_path(o.checkpoint), train_header(o));
  if (!o.out.empty()) {
    std::ostringstream hist;
    emit_history_plot_data(res.history, hist, train_header(o));
    write_file(o.out, hist.str());
  }

  std::cout << "trained " << o.variant << " V=" << vocab.size() << " K=" << o.K << " H=" << o.H
            << " on " << segments.size() << " segments (" << train_docs.size() << " documents)\n"
            << "total_updates=" << res.total_updates << "\n"
            << "best_updates=" << res.best_updates << "\n"
            << "best_dev_perplexity=" << fmt_metric(res.best_dev_perplexity) << "\n"
            << "checkpoint=" << o.checkpoint << "\n";
  return 0;
}

int run_ppl(const PplOpts& o) {
  LoadedModel lm = load_model_and_vocab(o.checkpoint, o.vocab);
  lm.model.force_uniform = o.force_uniform;
  const auto raw = read_corpus_file(o.corpus);
  if (raw.empty()) {
    throw std::runtime_error("evaluation corpus is empty: " + o.corpus);
  }
  const auto docs = encode_corpus(raw, lm.vocab);
  const CorpusLikelihood ll = corpus_log_likelihood(lm.model, docs);

  std::ostringstream kv;
  kv << "documents=" << docs.size() << "\n"
     << "tokens=" << ll.tokens << "\n"
     << "log_likelihood=" << fmt_metric(ll.log_likelihood) << "\n"
     << "mean_log_likelihood=" << fmt_metric(ll.mean_log_likelihood()) << "\n"
     << "perplexity=" << fmt_metric(ll.perplexity()) << "\n";
  std::cout << kv.str();
  if (!o.out.empty()) {
    std::ostringstream h;
    h << "# dclm ppl --corpus " << o.corpus << " --checkpoint " << o.checkpoint
      << (o.force_uniform ? " --force-uniform" : "") << "\n";
    write_file(o.out, h.str() + kv.str());
  }
  return 0;
}

int run_coherence(const CoherenceOpts& o) {
  LoadedModel lm = load_model_and_vocab(o.checkpoint, o.vocab);
  const auto raw = read_corpus_file(o.corpus);
  if (raw.empty()) {
    throw std::runtime_error("test corpus is empty: " + o.corpus);
  }
  const auto docs = encode_corpus(raw, lm.vocab);
  const BootstrapResult res = bootstrap_coherence(lm.model, docs, o.bootstrap_sets, o.seed);

  std::ostringstream kv;
  kv << "documents=" << docs.size() << "\n"
     << "bootstrap_sets=" << o.bootstrap_sets << "\n"
     << "mean_accuracy=" << fmt_metric(res.mean) << "\n"
     << "std=" << fmt_metric(res.stddev) << "\n"
     << "ties=" << res.ties << "\n";

  std::cout << "coherence discrimination over " << docs.size() << " documents, "
            << o.bootstrap_sets << " bootstrap sets\n"
            << "  mean accuracy   " << fmt_metric(100.0 * res.mean) << "%\n"
            << "  std deviation   " << fmt_metric(100.0 * res.stddev) << "%\n"
            << "  ties            " << res.ties << "\n";

  if (!o.baseline_checkpoint.empty()) {
    LoadedModel base = load_model_and_vocab(o.baseline_checkpoint, o.baseline_vocab);
    for (int i = 0; i < lm.vocab.size(); ++i) {
      if (i >= base.vocab.size() || base.vocab.token(i) != lm.vocab.token(i)) {
        throw std::runtime_error("baseline vocabulary differs; models are not comparable");
      }
    }
    const auto base_docs = encode_corpus(raw, base.vocab);
    // same seed: both models are judged on identical resampled sets
    const BootstrapResult bres =
        bootstrap_coherence(base.model, base_docs, o.bootstrap_sets, o.seed);
    const ZTestResult zt = z_test(res, bres);
    std::cout << "  baseline mean   " << fmt_metric(100.0 * bres.mean) << "%\n"
              << "  z statistic     " << fmt_metric(zt.z) << "\n"
              << "  one-sided p     " << fmt_metric(zt.p_one_sided) << "\n";
    kv << "baseline_mean_accuracy=" << fmt_metric(bres.mean) << "\n"
       << "baseline_std=" << fmt_metric(bres.stddev) << "\n"
       << "z=" << fmt_metric(zt.z) << "\n"
       << "p=" << fmt_metric(zt.p_one_sided) << "\n";
  }
  std::cout << kv.str();

  if (!o.out.empty()) {
    std::ostringstream h;
    h << "# dclm coherence --test " << o.corpus << " --checkpoint " << o.checkpoint
      << " --bootstrap-sets " << o.bootstrap_sets << " --seed " << o.seed;
    if (!o.baseline_checkpoint.empty()) h << " --baseline-checkpoint " << o.baseline_checkpoint;
    h << "\n";
    write_file(o.out, h.str() + kv.str());
  }
  return 0;
}

int run_gridsearch(const GridOpts& o) {
  const auto train_raw = read_corpus_file(o.corpus);
  const auto dev_raw = read_corpus_file(o.dev);
  if (train_raw.empty() || dev_raw.empty()) {
    throw std::runtime_error("gridsearch needs non-empty --corpus and --dev");
  }
  const Vocabulary vocab = build_vocab(train_raw, o.top_k);
  const auto segments = segment_corpus(encode_corpus(train_raw, vocab), o.L);
  const auto dev_docs = encode_corpus(dev_raw, vocab);

  TrainConfig cfg;
  cfg.L = o.L;
  cfg.lambda = o.lambda;
  cfg.tau = o.tau;
  cfg.epochs = o.epochs;
  cfg.seed = o.seed;

  const GridSearchResult res = grid_search(parse_variant(o.variant), vocab.size(), o.A, segments,
                                           dev_docs, o.Ks, o.Hs, cfg);

  std::ostringstream table;
  table << "K\tH\tdev_perplexity\n";
  for (const GridCell& c : res.cells) {
    table << c.K << "\t" << c.H << "\t" << fmt_metric(c.dev_perplexity) << "\n";
  }
  const GridCell& best = res.cells[static_cast<std::size_t>(res.best_index)];
  std::ostringstream kv;
  kv << "cells=" << res.cells.size() << "\n"
     << "best_K=" << best.K << "\n"
     << "best_H=" << best.H << "\n"
     << "best_dev_perplexity=" << fmt_metric(best.dev_perplexity) << "\n";
  std::cout << table.str() << kv.str();

  if (!o.out.empty()) {
    std::ostringstream h;
    h << "# dclm gridsearch --corpus " << o.corpus << " --dev " << o.dev << " --variant "
      << o.variant << " --A " << o.A << " --L " << o.L << " --lambda " << fmt_flag(o.lambda)
      << " --tau " << fmt_flag(o.tau) << " --epochs " << o.epochs << " --top-k " << o.top_k
      << " --seed " << o.seed << "\n";
    write_file(o.out, h.str() + table.str() + kv.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"document-context language modeling toolkit"};
  app.require_subcommand(1);

  StatsOpts stats;
  CLI::App* cmd_stats = app.add_subcommand("stats", "corpus statistics");
  cmd_stats->add_option("--corpus", stats.corpus, "corpus file")->required();
  cmd_stats->add_option("--out", stats.out, "write key=value stats here");

  SynthOpts synth;
  CLI::App* cmd_synth = app.add_subcommand("synth", "generate a synthetic topic corpus");
  cmd_synth->add_option("--out", synth.out, "corpus file to write")->required();
  cmd_synth->add_option("--docs", synth.docs, "number of documents");
  cmd_synth->add_option("--sentences", synth.sentences, "sentences per document");
  cmd_synth->add_option("--words", synth.words, "words per sentence");
  cmd_synth->add_option("--topics", synth.topics, "number of topics");
  cmd_synth->add_option("--topic-words", synth.topic_words, "words per topic");
  cmd_synth->add_option("--dependency", synth.dependency, "chained|independent");
  cmd_synth->add_option("--seed", synth.seed, "rng seed");

  TrainOpts tr;
  CLI::App* cmd_train = app.add_subcommand("train", "train a model");
  cmd_train->add_option("--corpus", tr.corpus, "training corpus")->required();
  cmd_train->add_option("--dev", tr.dev, "development corpus")->required();
  cmd_train->add_option("--checkpoint", tr.checkpoint, "checkpoint to write")->required();
  cmd_train->add_option("--out", tr.out, "training history file");
  cmd_train->add_option("--variant", tr.variant, "rnnlm|drnnlm|ccdclm|codclm|adclm");
  cmd_train->add_option("--K", tr.K, "embedding dimension");
  cmd_train->add_option("--H", tr.H, "hidden dimension");
  cmd_train->add_option("--A", tr.A, "attention hidden dimension");
  cmd_train->add_option("--L", tr.L, "segment length in sentences");
  cmd_train->add_option("--lambda", tr.lambda, "AdaGrad learning rate");
  cmd_train->add_option("--tau", tr.tau, "gradient norm threshold");
  cmd_train->add_option("--epochs", tr.epochs, "training epochs");
  cmd_train->add_option("--eval-every", tr.eval_every, "updates between dev evals (0: per epoch)");
  cmd_train->add_option("--top-k", tr.top_k, "vocabulary cutoff");
  cmd_train->add_option("--seed", tr.seed, "rng seed");

  PplOpts ppl;
  CLI::App* cmd_ppl = app.add_subcommand("ppl", "perplexity of a corpus under a checkpoint");
  cmd_ppl->add_option("--corpus,--test", ppl.corpus, "corpus to score")->required();
  cmd_ppl->add_option("--checkpoint", ppl.checkpoint, "model checkpoint")->required();
  cmd_ppl->add_option("--vocab", ppl.vocab, "vocabulary file (default: checkpoint + .vocab)");
  cmd_ppl->add_option("--out", ppl.out, "write key=value metrics here");
  cmd_ppl->add_flag("--force-uniform", ppl.force_uniform, "replace the emission by uniform");

  CoherenceOpts coh;
  CLI::App* cmd_coh = app.add_subcommand("coherence", "shuffled-document discrimination");
  cmd_coh->add_option("--test,--corpus", coh.corpus, "test corpus")->required();
  cmd_coh->add_option("--checkpoint", coh.checkpoint, "model checkpoint")->required();
  cmd_coh->add_option("--baseline-checkpoint", coh.baseline_checkpoint,
                      "second checkpoint for a z-test");
  cmd_coh->add_option("--vocab", coh.vocab, "vocabulary file (default: checkpoint + .vocab)");
  cmd_coh->add_option("--baseline-vocab", coh.baseline_vocab,
                      "baseline vocabulary (default: baseline checkpoint + .vocab)");
  cmd_coh->add_option("--out", coh.out, "write key=value results here");
  cmd_coh->add_option("--bootstrap-sets", coh.bootstrap_sets, "number of resampled test sets");
  cmd_coh->add_option("--seed", coh.seed, "rng seed");

  GridOpts grid;
  CLI::App* cmd_grid = app.add_subcommand("gridsearch", "exhaustive (K,H) search");
  cmd_grid->add_option("--corpus", grid.corpus, "training corpus")->required();
  cmd_grid->add_option("--dev", grid.dev, "development corpus")->required();
  cmd_grid->add_option("--out", grid.out, "write the grid table here");
  cmd_grid->add_option("--variant", grid.variant, "model variant");
  cmd_grid->add_option("--K", grid.Ks, "embedding dimensions to try")->delimiter(',');
  cmd_grid->add_option("--H", grid.Hs, "hidden dimensions to try")->delimiter(',');
  cmd_grid->add_option("--A", grid.A, "attention hidden dimension");
  cmd_grid->add_option("--L", grid.L, "segment length in sentences");
  cmd_grid->add_option("--lambda", grid.lambda, "AdaGrad learning rate");
  cmd_grid->add_option("--tau", grid.tau, "gradient norm threshold");
  cmd_grid->add_option("--epochs", grid.epochs, "epochs per cell");
  cmd_grid->add_option("--top-k", grid.top_k, "vocabulary cutoff");
  cmd_grid->add_option("--seed", grid.seed, "rng seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help
    }
    std::cerr << "dclm: " << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    if (cmd_stats->parsed()) return run_stats(stats);
    if (cmd_synth->parsed()) return run_synth(synth);
    if (cmd_train->parsed()) return run_train(tr);
    if (cmd_ppl->parsed()) return run_ppl(ppl);
    if (cmd_coh->parsed()) return run_coherence(coh);
    if (cmd_grid->parsed()) return run_gridsearch(grid);
  } catch (const std::exception& e) {
    std::cerr << "dclm: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
