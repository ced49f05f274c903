#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "dclm/dclm.hpp"

namespace {

namespace fs = std::filesystem;

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(DCLM_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult res;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) res.output.append(buf, n);
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "dclm_cli_tests";
  fs::create_directories(dir);
  return dir;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("stats reports document counts as key=value lines") {
  const fs::path corpus = work_dir() / "two_docs.txt";
  std::ofstream(corpus) << "a b\nc\n\nd e f\n";
  const CliResult res = run_cli("stats --corpus " + corpus.string());
  CHECK(res.exit_code == 0);
  CHECK(contains(res.output, "documents=2"));
  CHECK(contains(res.output, "mean_sentences=1.5"));
}

TEST_CASE("usage errors exit with code 2 and print usage text") {
  const CliResult unknown = run_cli("stats --corpus x --definitely-not-a-flag");
  CHECK(unknown.exit_code == 2);
  CHECK(contains(unknown.output, "Usage"));

  const CliResult no_sub = run_cli("");
  CHECK(no_sub.exit_code == 2);

  const CliResult missing_required = run_cli("train --corpus only.txt");
  CHECK(missing_required.exit_code == 2);
}

TEST_CASE("missing input files exit with code 1 and name the path") {
  const CliResult res = run_cli("stats --corpus /nonexistent/corpus.txt");
  CHECK(res.exit_code == 1);
  CHECK(contains(res.output, "/nonexistent/corpus.txt"));
}

TEST_CASE("synth output is deterministic, parseable, and self-describing") {
  const fs::path c1 = work_dir() / "synth1.txt";
  const std::string flags = "--docs 6 --sentences 3 --words 3 --topics 2 --topic-words 3 --seed 9";
  CHECK(run_cli("synth --out " + c1.string() + " " + flags).exit_code == 0);
  const std::string b1 = file_bytes(c1);
  // identical flags reproduce the file bit-exactly
  CHECK(run_cli("synth --out " + c1.string() + " " + flags).exit_code == 0);
  CHECK(b1 == file_bytes(c1));
  CHECK(first_line(b1).rfind("# dclm synth", 0) == 0);

  std::ifstream in(c1);
  const auto docs = dclm::parse_corpus(in);
  REQUIRE(docs.size() == 6);
  for (const auto& d : docs) {
    CHECK(d.sentences.size() == 3);
    for (const auto& s : d.sentences) CHECK(s.size() == 3);
  }
}

TEST_CASE("train, ppl and coherence run end to end") {
  const fs::path dir = work_dir();
  const fs::path corpus = dir / "train.txt";
  const fs::path dev = dir / "dev.txt";
  const fs::path ckpt = dir / "model.ckpt";
  const fs::path hist = dir / "history.tsv";

  REQUIRE(run_cli("synth --out " + corpus.string() +
                  " --docs 8 --sentences 3 --words 3 --topics 2 --topic-words 3 --seed 4")
              .exit_code == 0);
  REQUIRE(run_cli("synth --out " + dev.string() +
                  " --docs 3 --sentences 3 --words 3 --topics 2 --topic-words 3 --seed 5")
              .exit_code == 0);

  const CliResult tr = run_cli("train --corpus " + corpus.string() + " --dev " + dev.string() +
                               " --checkpoint " + ckpt.string() + " --out " + hist.string() +
                               " --variant ccdclm --K 4 --H 4 --L 5 --lambda 0.1 --tau 5.0" +
                               " --epochs 2 --seed 3");
  CHECK(tr.exit_code == 0);
  CHECK(contains(tr.output, "best_dev_perplexity="));
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(fs::path(ckpt.string() + ".vocab")));

  // history file: provenance header then sorted rows
  const std::string hbytes = file_bytes(hist);
  CHECK(first_line(hbytes).rfind("# dclm train --corpus", 0) == 0);
  CHECK(contains(hbytes, "updates\tmean_log_likelihood"));

  const CliResult ppl = run_cli("ppl --corpus " + dev.string() + " --checkpoint " + ckpt.string());
  CHECK(ppl.exit_code == 0);
  CHECK(contains(ppl.output, "perplexity="));

  // 2*3 topic words + 3 specials = vocabulary of 9
  const CliResult uni = run_cli("ppl --corpus " + dev.string() + " --checkpoint " + ckpt.string() +
                                " --force-uniform");
  CHECK(uni.exit_code == 0);
  CHECK(contains(uni.output, "perplexity=9\n"));

  const CliResult coh = run_cli("coherence --test " + dev.string() + " --checkpoint " +
                                ckpt.string() + " --bootstrap-sets 20 --seed 6");
  CHECK(coh.exit_code == 0);
  CHECK(contains(coh.output, "mean_accuracy="));
  CHECK(contains(coh.output, "ties="));

  // corrupt checkpoint: runtime error, code 1
  std::ofstream(ckpt, std::ios::binary) << "garbage";
  const CliResult bad = run_cli("ppl --corpus " + dev.string() + " --checkpoint " + ckpt.string());
  CHECK(bad.exit_code == 1);
  CHECK(contains(bad.output, "error"));
}

TEST_CASE("identical flags and seed reproduce checkpoint and metric files bit-exactly") {
  const fs::path dir = work_dir();
  const fs::path corpus = dir / "det_corpus.txt";
  const fs::path dev = dir / "det_dev.txt";
  REQUIRE(run_cli("synth --out " + corpus.string() +
                  " --docs 6 --sentences 3 --words 3 --topics 2 --topic-words 3 --seed 11")
              .exit_code == 0);
  REQUIRE(run_cli("synth --out " + dev.string() +
                  " --docs 2 --sentences 3 --words 3 --topics 2 --topic-words 3 --seed 12")
              .exit_code == 0);

  // identical flags means identical paths too; capture bytes between runs
  const fs::path ckpt = dir / "det.ckpt";
  const fs::path hist = dir / "det.tsv";
  const fs::path metrics = dir / "det.kv";
  auto one_run = [&]() {
    REQUIRE(run_cli("train --corpus " + corpus.string() + " --dev " + dev.string() +
                    " --checkpoint " + ckpt.string() + " --out " + hist.string() +
                    " --variant codclm --K 3 --H 3 --epochs 2 --seed 21")
                .exit_code == 0);
    REQUIRE(run_cli("ppl --corpus " + dev.string() + " --checkpoint " + ckpt.string() +
                    " --out " + metrics.string())
                .exit_code == 0);
    return file_bytes(ckpt) + "\x1f" + file_bytes(hist) + "\x1f" + file_bytes(metrics);
  };
  const std::string first = one_run();
  CHECK(first == one_run());
}

TEST_CASE("train defaults match the standard recipe") {
  const fs::path dir = work_dir();
  const fs::path corpus = dir / "defaults_corpus.txt";
  const fs::path dev = dir / "defaults_dev.txt";
  const fs::path ckpt = dir / "defaults.ckpt";
  const fs::path hist = dir / "defaults.tsv";
  REQUIRE(run_cli("synth --out " + corpus.string() +
                  " --docs 4 --sentences 2 --words 3 --topics 2 --topic-words 3 --seed 51")
              .exit_code == 0);
  REQUIRE(run_cli("synth --out " + dev.string() +
                  " --docs 2 --sentences 2 --words 3 --topics 2 --topic-words 3 --seed 52")
              .exit_code == 0);
  // only required flags plus small dims; everything else resolves to defaults
  const CliResult res =
      run_cli("train --corpus " + corpus.string() + " --dev " + dev.string() + " --checkpoint " +
              ckpt.string() + " --out " + hist.string() + " --K 3 --H 3");
  REQUIRE(res.exit_code == 0);
  // the provenance header records the resolved defaults
  const std::string header = first_line(file_bytes(hist));
  CHECK(contains(header, "--variant ccdclm"));
  CHECK(contains(header, "--L 5"));
  CHECK(contains(header, "--lambda 0.1"));
  CHECK(contains(header, "--tau 5"));
  CHECK(contains(header, "--A 48"));
  CHECK(contains(header, "--top-k 10000"));
}

TEST_CASE("history files for L=5 and L=10 end within 2% of each other") {
  const fs::path dir = work_dir();
  const fs::path corpus = dir / "len_corpus.txt";
  const fs::path dev = dir / "len_dev.txt";
  // documents long enough that the two segmentations differ
  REQUIRE(run_cli("synth --out " + corpus.string() +
                  " --docs 32 --sentences 20 --words 6 --topics 5 --topic-words 5 --seed 61")
              .exit_code == 0);
  REQUIRE(run_cli("synth --out " + dev.string() +
                  " --docs 8 --sentences 20 --words 6 --topics 5 --topic-words 5 --seed 62")
              .exit_code == 0);

  auto final_ll = [&](int L) {
    const fs::path ckpt = dir / ("len_L" + std::to_string(L) + ".ckpt");
    const fs::path hist = dir / ("len_L" + std::to_string(L) + ".tsv");
    REQUIRE(run_cli("train --corpus " + corpus.string() + " --dev " + dev.string() +
                    " --checkpoint " + ckpt.string() + " --out " + hist.string() +
                    " --variant ccdclm --K 16 --H 16 --L " + std::to_string(L) +
                    " --epochs 6 --seed 13 --top-k 25")
                .exit_code == 0);
    std::istringstream lines(file_bytes(hist));
    std::string line, last;
    while (std::getline(lines, line)) {
      if (!line.empty() && line[0] != '#' && line[0] != 'u') last = line;
    }
    std::istringstream row(last);
    long long updates;
    double ll;
    REQUIRE((row >> updates >> ll));
    return ll;
  };
  const double ll5 = final_ll(5);
  const double ll10 = final_ll(10);
  CHECK(std::fabs(ll5 - ll10) / std::fabs(ll5) < 0.02);
}

TEST_CASE("gridsearch prints every cell and the winner") {
  const fs::path dir = work_dir();
  const fs::path corpus = dir / "grid_corpus.txt";
  const fs::path dev = dir / "grid_dev.txt";
  REQUIRE(run_cli("synth --out " + corpus.string() +
                  " --docs 5 --sentences 2 --words 3 --topics 2 --topic-words 3 --seed 31")
              .exit_code == 0);
  REQUIRE(run_cli("synth --out " + dev.string() +
                  " --docs 2 --sentences 2 --words 3 --topics 2 --topic-words 3 --seed 32")
              .exit_code == 0);
  const CliResult res = run_cli("gridsearch --corpus " + corpus.string() + " --dev " +
                                dev.string() + " --variant rnnlm --K 2,3 --H 2 --epochs 1" +
                                " --seed 7");
  CHECK(res.exit_code == 0);
  CHECK(contains(res.output, "cells=2"));
  CHECK(contains(res.output, "best_K="));
  CHECK(contains(res.output, "best_H=2"));
}

}  // TEST_SUITE
