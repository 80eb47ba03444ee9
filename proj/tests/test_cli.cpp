#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <regex>
#include <string>

#include <nlohmann/json.hpp>

#include "catvrnn/checkpoint.hpp"
#include "catvrnn/data.hpp"
#include "test_util.hpp"

using namespace catvrnn;
using catvrnn::testing::read_file;
using catvrnn::testing::TempDir;
using catvrnn::testing::write_file;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(const std::string& args, const TempDir& dir) {
  const auto err_path = dir / "stderr.txt";
  const std::string cmd = std::string(CATVRNN_CLI) + " " + args + " 2>" + err_path.string();
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = read_file(err_path);
  return r;
}

const std::string kModel = " --embed 8 --hidden 10 --latent 4 --enc-hidden 10 --enc-out 8"
                           " --dec-hidden 10 --dec-out 8 --prior-hidden 6";

std::string corpus_args(const TempDir& d) {
  return "build-data --synthetic 2 --synthetic-per-cat 20 --synthetic-vocab 8 "
         "--synthetic-min-len 2 --synthetic-max-len 6 --seed 3 --output " + (d / "c.tsv").string();
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  TempDir d;
  EXPECT_EQ(run("--help", d).code, 0);
  EXPECT_EQ(run("", d).code, 1);
  EXPECT_EQ(run("frobnicate", d).code, 1);
  EXPECT_EQ(run("train", d).code, 1);  // --corpus is required
  EXPECT_EQ(run("train --corpus x --epochs notanumber", d).code, 1);
}

TEST(Cli, BuildDataWritesCorpusAndManifest) {
  TempDir d;
  const auto r = run(corpus_args(d), d);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto corpus = load_corpus(d / "c.tsv");
  EXPECT_EQ(corpus.sentences.size(), 40u);
  EXPECT_EQ(corpus.sentences, make_synthetic_corpus(2, 20, 8, {2, 6}, 3).sentences);
  const auto manifest = nlohmann::json::parse(read_file(d / "c.tsv.manifest.json"));
  EXPECT_EQ(manifest.at("counts_per_category"), nlohmann::json::array({20, 20}));
  EXPECT_EQ(manifest.at("seed"), 3);
  EXPECT_NE(read_file(d / "c.tsv").find("# seed=3"), std::string::npos);
}

TEST(Cli, BuildDataVariantsAndFilters) {
  TempDir d;
  ASSERT_EQ(run("build-data --synthetic 10 --synthetic-per-cat 1000 --synthetic-vocab 5 "
                "--synthetic-min-len 1 --synthetic-max-len 3 --seed 1 --output " + (d / "base.tsv").string(), d).code, 0);
  const auto r = run("build-data --input " + (d / "base.tsv").string() + " --variant icq-5c --output " +
                         (d / "q5.tsv").string(), d);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_corpus(d / "q5.tsv").category_counts(), std::vector<std::size_t>(5, 2000));
  const auto f = run("build-data --input " + (d / "base.tsv").string() + " --filter-len 2:3 --output " +
                         (d / "f.tsv").string(), d);
  ASSERT_EQ(f.code, 0) << f.err;
  for (const auto& s : load_corpus(d / "f.tsv").sentences) EXPECT_GE(s.tokens.size(), 2u);
  EXPECT_EQ(run("build-data --input " + (d / "missing.tsv").string() + " --output " + (d / "x.tsv").string(), d).code, 2);
  EXPECT_EQ(run("build-data --input " + (d / "base.tsv").string() + " --variant icq-3c --output " +
                    (d / "x.tsv").string(), d).code, 2);
}

TEST(Cli, TrainGenerateResumeAndEvaluate) {
  TempDir d;
  ASSERT_EQ(run(corpus_args(d), d).code, 0);
  const std::string corpus = (d / "c.tsv").string();
  const auto tr = run("train --corpus " + corpus + " --out-dir " + (d / "run").string() +
                          " --epochs 4 --batch-size 8 --save-every 2 --seed 5" + kModel, d);
  ASSERT_EQ(tr.code, 0) << tr.err;
  EXPECT_NE(tr.out.find("digest"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(d / "run/epoch-0002.ckpt"));
  const auto final_ckpt = (d / "run/final.ckpt").string();

  // Metrics stream: one JSON object per epoch with a non-negative KL entry.
  std::istringstream metrics(read_file(d / "run/metrics.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(metrics, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("epoch"), ++lines);
    EXPECT_GE(j.at("kl").get<double>(), 0.0);
  }
  EXPECT_EQ(lines, 4);

  // Resume from epoch 2 reproduces the final checkpoint body.
  const auto rs = run("train --corpus " + corpus + " --out-dir " + (d / "resumed").string() +
                          " --resume " + (d / "run/epoch-0002.ckpt").string() + " --epochs 4 --batch-size 8 --seed 5", d);
  ASSERT_EQ(rs.code, 0) << rs.err;
  EXPECT_EQ(checkpoint_digest(final_ckpt), checkpoint_digest(d / "resumed/final.ckpt"));

  // Same seed gives byte-identical TSVs.
  const std::string gen = "generate --checkpoint " + final_ckpt + " -n 25 --seed 9 -o ";
  ASSERT_EQ(run(gen + (d / "g1.tsv").string(), d).code, 0);
  ASSERT_EQ(run(gen + (d / "g2.tsv").string(), d).code, 0);
  EXPECT_EQ(read_file(d / "g1.tsv"), read_file(d / "g2.tsv"));
  const auto g1 = load_corpus(d / "g1.tsv", 2, true);
  EXPECT_EQ(g1.category_counts(), (std::vector<std::size_t>{25, 25}));
  EXPECT_EQ(run("generate --checkpoint " + final_ckpt + " -c 5 -o -", d).code, 1);
  EXPECT_EQ(run("generate --checkpoint " + (d / "nope.ckpt").string() + " -o -", d).code, 2);

  const auto ev = run("evaluate --checkpoint " + final_ckpt + " --corpus " + corpus +
                          " -n 20 --clf-epochs 2 --clf-embed 8 --clf-maps 4 --seed 1 -o -", d);
  ASSERT_EQ(ev.code, 0) << ev.err;
  const auto report = nlohmann::json::parse(ev.out);
  EXPECT_GE(report.at("perplexity").get<double>(), 1.0);
  const double acc = report.at("category_accuracy").get<double>();
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);
  EXPECT_EQ(report.at("bleu_ha").size(), 4u);

  // Scoring the training set against itself: BLEU_F is 1.
  const auto self = run("evaluate --corpus " + corpus + " --generated " + corpus + " --no-classifier -o -", d);
  ASSERT_EQ(self.code, 0) << self.err;
  const auto sj = nlohmann::json::parse(self.out);
  for (const auto& [n, v] : sj.at("bleu_f").items()) EXPECT_NEAR(v.get<double>(), 1.0, 1e-12) << n;
}

TEST(Cli, ConfigFilePrecedence) {
  TempDir d;
  ASSERT_EQ(run(corpus_args(d), d).code, 0);
  write_file(d / "run.cfg", "# training defaults\nepochs = 2\nbatch-size = 4\nseed = 8\n");
  const auto r = run("train --config " + (d / "run.cfg").string() + " --corpus " + (d / "c.tsv").string() +
                         " --out-dir " + (d / "o").string() + " --seed 11" + kModel, d);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ck = load_checkpoint<double>(d / "o/final.ckpt");
  EXPECT_EQ(ck.epoch, 2);                            // from the file
  EXPECT_EQ(ck.seed, 11u);                           // flag beats file
  // The effective configuration is echoed with the source of each value.
  EXPECT_TRUE(std::regex_search(r.err, std::regex(R"(epochs\s+= 2  \[file\])")));
  EXPECT_TRUE(std::regex_search(r.err, std::regex(R"(seed\s+= 11  \[flag\])")));
  EXPECT_TRUE(std::regex_search(r.err, std::regex(R"(lr\s+= \S+  \[default\])")));
  EXPECT_EQ(run("train --config " + (d / "missing.cfg").string() + " --corpus x", d).code, 1);
}

TEST(Cli, GradCheckExitCodes) {
  TempDir d;
  const auto ok = run("grad-check", d);
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_NE(ok.out.find("gradient check passed"), std::string::npos);
  const auto bad = run("grad-check --corrupt-backward", d);
  EXPECT_EQ(bad.code, 3);
  EXPECT_NE(bad.out.find("FAILED"), std::string::npos);
}
