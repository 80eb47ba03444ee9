// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
//
// Behavioral criteria (3, 4, 5) train on the disjoint-vocabulary synthetic
// corpus at desk scale. Every training run is shared between the criteria
// that read it, so each (variant, seed) pair is trained once.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bleu_oracle.hpp"
#include "catvrnn/bleu.hpp"
#include "catvrnn/checkpoint.hpp"
#include "catvrnn/data.hpp"
#include "catvrnn/evaluation.hpp"
#include "catvrnn/grad_suite.hpp"
#include "catvrnn/model.hpp"
#include "catvrnn/training.hpp"

using namespace catvrnn;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Collects failed conditions; the criterion passes when none failed.
struct Verdict {
  std::vector<std::string> failures;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  bool passed() const { return failures.empty(); }
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

class ScratchDir {
 public:
  ScratchDir() {
    path_ = fs::temp_directory_path() / ("catvrnn_acceptance_" + std::to_string(std::random_device{}()));
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  fs::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Desk-scale protocol

constexpr int kDeskEpochs = 100;
constexpr int kKlEpochs = 50;
constexpr std::size_t kOracleSamples = 200;  // generated sentences per category
const std::vector<std::uint64_t> kSeeds{1, 2, 3};

struct Desk {
  LabeledCorpus corpus = make_synthetic_corpus(2, 200, 50, {5, 10}, 11);
  Vocabulary vocab = build_vocabulary(corpus);
  Batch data;
  TrainPlan plan;

  Desk() {
    plan.epochs = kDeskEpochs;
    plan.batch_size = 16;
    plan.adam.lr = 1e-3;
    data = encode_batch(corpus.sentences, vocab, 11);
  }

  ModelConfig config(const std::string& variant) const {
    ModelConfig c;
    c.vocab_size = vocab.size();
    c.num_categories = 2;
    c.max_len = 11;
    c.embed_dim = 64;
    c.hidden_dim = 64;
    c.latent_dim = 32;
    c.encoder_hidden = 64;
    c.encoder_out = 64;
    c.decoder_hidden = 64;
    c.decoder_out = 64;
    c.prior_hidden = 64;
    if (variant == "adaptive") c.init_mode = InitMode::kAdaptive;
    if (variant == "nophi") c.init_mode = InitMode::kZero;  // static at evaluation
    if (variant == "vrnn") c.use_classifier = false;
    if (variant == "kl") c.use_kl_term = true;
    return c;
  }
};

struct RunResult {
  std::vector<EpochStats> epochs;
  double accuracy = 0.0;  // word-membership oracle on generated sentences
  double seconds = 0.0;
};

/// Fraction of generated sentences whose words all come from the intended
/// category's private vocabulary.
template <typename Scalar>
double oracle_accuracy(CatVrnnParams<Scalar>& p, const ModelConfig& cfg, const Vocabulary& vocab) {
  Rng rng(99);
  const auto gen = generate_corpus(p, cfg, vocab, kOracleSamples, rng);
  std::size_t hits = 0;
  for (const auto& s : gen.sentences) hits += synthetic_oracle_category(s.tokens) == s.category;
  return static_cast<double>(hits) / static_cast<double>(gen.sentences.size());
}

RunResult train_desk(const Desk& desk, const std::string& variant, std::uint64_t seed, int epochs) {
  const auto t0 = Clock::now();
  auto plan = desk.plan;
  plan.epochs = epochs;
  auto st = init_training<float>(desk.config(variant), plan, seed);
  RunResult r;
  for (int e = 0; e < epochs; ++e) r.epochs.push_back(train_epoch(desk.data, st, plan));
  r.accuracy = oracle_accuracy(st.params, st.config, desk.vocab);
  r.seconds = seconds_since(t0);
  std::cerr << "  trained " << variant << " seed " << seed << ": " << epochs << " epochs, gen nll "
            << fmt(r.epochs.back().mean_gen_nll) << ", oracle accuracy " << fmt(r.accuracy) << ", "
            << fmt(r.seconds, 3) << " s\n";
  return r;
}

struct DeskRuns {
  Desk desk;
  std::map<std::pair<std::string, std::uint64_t>, RunResult> runs;
  double seconds = 0.0;

  const RunResult& get(const std::string& variant, std::uint64_t seed, int epochs = kDeskEpochs) {
    const auto key = std::make_pair(variant + "/" + std::to_string(epochs), seed);
    auto it = runs.find(key);
    if (it == runs.end()) {
      it = runs.emplace(key, train_desk(desk, variant, seed, epochs)).first;
      seconds += it->second.seconds;
    }
    return it->second;
  }
};

// ---------------------------------------------------------------------------
// Criteria

Verdict gradient_suite() {
  Verdict v;
  const auto t0 = Clock::now();
  const auto entries = run_gradient_suite({}, 7);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::size_t full_model = 0;
  for (const auto& e : entries) {
    worst = std::max(worst, e.report.max_rel_error);
    v.require(e.report.passed && e.report.max_rel_error < 1e-4 && e.report.checked > 0,
              e.name + " max rel err " + fmt(e.report.max_rel_error));
    if (e.name.rfind("model", 0) == 0) ++full_model;
  }
  v.require(full_model >= 4, "expected full-model checks for both init modes, KL on and off");
  v.require(secs < 60.0, "runtime " + fmt(secs, 3) + " s");
  v.detail << entries.size() << " checks (" << full_model << " full-model), worst rel err " << fmt(worst, 3)
           << ", " << fmt(secs, 3) << " s";
  return v;
}

Verdict init_invariants() {
  Verdict v;
  ModelConfig cfg;
  cfg.vocab_size = 12;
  Rng rng(21);
  // Static: sum is +omega for category 0 and -omega for category 1.
  double worst_sum = 0.0;
  for (int draw = 0; draw < 1000; ++draw) {
    for (int c = 0; c < 2; ++c) {
      const auto h = init_hidden_static<double>(c, cfg, rng);
      const double expected = c == 0 ? cfg.static_omega : -cfg.static_omega;
      worst_sum = std::max(worst_sum, std::abs(h.sum() - expected));
      const bool signed_ok = c == 0 ? h.minCoeff() > 0.0 : h.maxCoeff() < 0.0;
      if (!signed_ok) v.require(false, "static coordinate with the wrong sign");
    }
  }
  v.require(worst_sum <= 1e-10, "static sum off by " + fmt(worst_sum));

  // Adaptive: h0(c+1) - h0(c) == omega exactly (dyadic parameters).
  ModelConfig acfg = cfg;
  acfg.init_mode = InitMode::kAdaptive;
  acfg.num_categories = 4;
  acfg.hidden_dim = 16;
  Rng arng(5);
  auto p = make_params<double>(acfg, arng);
  auto& omega = p.store[*p.init_omega].value;
  auto& bias = p.store[*p.init_bias].value;
  for (Index i = 0; i < omega.size(); ++i) {
    omega(0, i) = 0.125 * static_cast<double>(i - 5);
    bias(0, i) = -0.5 + 0.0625 * static_cast<double>(i);
  }
  Tape<double> t(false);
  const Matrix<double> h = initial_hidden(t, p, acfg, {0, 1, 2, 3}, Phase::kEval, arng).value();
  for (Index c = 0; c + 1 < 4; ++c) {
    v.require(Matrix<double>(h.row(c + 1) - h.row(c)) == omega, "adaptive difference not exact");
  }

  // Zero: identical output for unrelated rng states, nothing drawn.
  ModelConfig zcfg = cfg;
  zcfg.init_mode = InitMode::kZero;
  zcfg.hidden_dim = 16;
  Rng a(1), b(999);
  auto zp = make_params<double>(zcfg, a);
  const auto before = a.state();
  Tape<double> ta(false), tb(false);
  const Matrix<double> ha = initial_hidden(ta, zp, zcfg, {0, 1}, Phase::kTrain, a).value();
  const Matrix<double> hb = initial_hidden(tb, zp, zcfg, {0, 1}, Phase::kTrain, b).value();
  v.require(ha == hb && ha.isZero(0.0), "zero init depends on rng");
  v.require(a.state() == before, "zero init consumed random draws");
  v.detail << "static |sum - omega| max " << fmt(worst_sum, 3) << " over 1000 draws x 2 categories";
  return v;
}

Verdict category_steering(DeskRuns& d) {
  Verdict v;
  for (const std::string variant : {"static", "adaptive", "nophi"}) {
    v.detail << variant << " [";
    for (auto seed : kSeeds) {
      const double acc = d.get(variant, seed).accuracy;
      v.detail << (seed == kSeeds.front() ? "" : " ") << fmt(acc);
      if (variant == "nophi") {
        v.require(std::abs(acc - 0.5) <= 0.10, "nophi seed " + std::to_string(seed) + " accuracy " + fmt(acc));
      } else {
        v.require(acc >= 0.90, variant + " seed " + std::to_string(seed) + " accuracy " + fmt(acc));
      }
    }
    v.detail << "] ";
  }
  v.detail << kDeskEpochs << " epochs";
  return v;
}

Verdict multitask_ordering(DeskRuns& d) {
  Verdict v;
  std::vector<double> acc_cat, acc_vrnn, nll_cat, nll_vrnn;
  for (auto seed : kSeeds) {
    acc_cat.push_back(d.get("static", seed).accuracy);
    acc_vrnn.push_back(d.get("vrnn", seed).accuracy);
    nll_cat.push_back(d.get("static", seed).epochs.back().mean_gen_nll);
    nll_vrnn.push_back(d.get("vrnn", seed).epochs.back().mean_gen_nll);
  }
  const double ma = median(acc_cat), mav = median(acc_vrnn);
  const double mn = median(nll_cat), mnv = median(nll_vrnn);
  v.require(ma >= mav, "median accuracy " + fmt(ma) + " < " + fmt(mav));
  v.require(mn <= mnv, "median final gen NLL " + fmt(mn) + " > " + fmt(mnv));
  v.detail << "median accuracy joint " << fmt(ma) << " vs detached " << fmt(mav) << "; median epoch-"
           << kDeskEpochs << " gen NLL joint " << fmt(mn) << " vs detached " << fmt(mnv);
  return v;
}

Verdict kl_direction(DeskRuns& d) {
  Verdict v;
  int higher = 0;
  double min_kl = std::numeric_limits<double>::infinity();
  for (auto seed : kSeeds) {
    const auto& on = d.get("kl", seed, kKlEpochs);
    const auto& off = d.get("static", seed);  // KL off; epoch 50 of the same run
    const double g_on = on.epochs[kKlEpochs - 1].mean_gen_nll;
    const double g_off = off.epochs[kKlEpochs - 1].mean_gen_nll;
    higher += g_on > g_off;
    v.detail << "seed " << seed << " " << fmt(g_on) << " vs " << fmt(g_off) << "; ";
    for (const auto& e : on.epochs) {
      min_kl = std::min(min_kl, e.min_kl);
      v.require(std::isfinite(e.mean_kl), "KL not reported at epoch " + std::to_string(e.epoch));
    }
  }
  v.require(higher >= 2, "KL-on epoch-50 gen loss higher in only " + std::to_string(higher) + " of 3 seeds");
  v.require(min_kl >= 0.0, "negative KL " + fmt(min_kl));
  v.detail << higher << "/3 higher, min per-sentence KL " << fmt(min_kl, 3);
  return v;
}

Verdict bleu_oracle() {
  using testing::all_sentences;
  using testing::oracle_bleu;
  using testing::random_corpus;
  Verdict v;
  const auto t0 = Clock::now();
  std::size_t cases = 0;
  double worst = 0.0;
  auto compare = [&](const std::vector<TokenSentence>& c, const std::vector<TokenSentence>& r) {
    for (int n = 2; n <= 5; ++n) {
      worst = std::max(worst, std::abs(bleu_corpus(c, r, n) - oracle_bleu(c, r, n)));
      ++cases;
    }
  };
  // Exhaustive: every single-sentence pair, length <= 3, six words.
  const auto s6 = all_sentences(6, 3);
  for (const auto& c : s6) {
    for (const auto& r : s6) compare({c}, {r});
  }
  // Exhaustive: every 2x2 corpus, length <= 3, two words.
  const auto s2 = all_sentences(2, 3);
  for (const auto& c1 : s2)
    for (const auto& c2 : s2)
      for (const auto& r1 : s2)
        for (const auto& r2 : s2) compare({c1, c2}, {r1, r2});
  // Random corpora at the full bounds: <= 5 sentences x <= 8 tokens, six words.
  std::mt19937_64 g(2024);
  for (int trial = 0; trial < 20000; ++trial) {
    const auto c = random_corpus(g, 5, 8, 6);
    const auto r = random_corpus(g, 5, 8, 6);
    compare(c, r);
  }
  v.require(worst <= 1e-9, "oracle mismatch " + fmt(worst));

  // Self-identity and harmonic bracket on 100 random corpora.
  std::mt19937_64 h(77);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_corpus(h, 5, 8, 6, 1);
    const auto y = random_corpus(h, 5, 8, 6, 1);
    for (int n = 2; n <= 5; ++n) {
      v.require(std::abs(bleu_corpus(x, x, n) - 1.0) <= 1e-12, "self BLEU != 1");
      const double f = bleu_corpus(x, y, n), b = bleu_corpus(y, x, n);
      const double ha = bleu_harmonic(f, b);
      v.require(ha >= std::min(f, b) - 1e-15 && ha <= std::max(f, b) + 1e-15, "harmonic mean outside [min, max]");
    }
  }
  v.detail << cases << " oracle comparisons, worst diff " << fmt(worst, 3) << ", " << fmt(seconds_since(t0), 3)
           << " s";
  return v;
}

ModelConfig small_model(int V, int T) {
  ModelConfig c;
  c.vocab_size = V;
  c.max_len = T;
  c.embed_dim = 8;
  c.hidden_dim = 12;
  c.latent_dim = 4;
  c.encoder_hidden = 12;
  c.encoder_out = 8;
  c.decoder_hidden = 12;
  c.decoder_out = 8;
  c.prior_hidden = 6;
  return c;
}

Verdict perplexity_anchors() {
  Verdict v;
  // Uniform: zero output layer gives equal logits at every step.
  const auto corpus = make_synthetic_corpus(2, 20, 7, {1, 5}, 3);
  const auto vocab = build_vocabulary(corpus);
  const auto cfg = small_model(vocab.size(), 6);
  Rng rng(1);
  auto p = make_params<double>(cfg, rng);
  p.store[p.output.weight].value.setZero();
  p.store[p.output.bias].value.setZero();
  const double uniform = perplexity(p, cfg, corpus.sentences, vocab, rng).perplexity;
  v.require(std::abs(uniform - vocab.size()) <= 1e-9 * vocab.size(), "uniform perplexity " + fmt(uniform, 12));

  // Random models never go below one.
  double lowest = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng r(seed);
    auto q = make_params<double>(cfg, r);
    lowest = std::min(lowest, perplexity(q, cfg, corpus.sentences, vocab, r).perplexity);
  }
  v.require(lowest >= 1.0, "perplexity below one");

  // Memorized single sentence.
  LabeledCorpus one;
  one.num_categories = 2;
  one.sentences = {{{"the", "cat", "sat", "on", "a", "mat"}, 0}};
  const auto ov = build_vocabulary(one);
  const auto ocfg = small_model(ov.size(), 7);
  TrainPlan plan;
  plan.epochs = 300;
  plan.batch_size = 1;
  plan.adam.lr = 1e-2;
  auto st = init_training<double>(ocfg, plan, 3);
  const auto data = encode_batch(one.sentences, ov, ocfg.max_len);
  for (int e = 0; e < plan.epochs; ++e) train_epoch(data, st, plan);
  Rng eval(4);
  const double memorized = perplexity(st.params, ocfg, one.sentences, ov, eval).perplexity;
  v.require(memorized <= 1.1 && memorized >= 1.0, "memorized perplexity " + fmt(memorized));
  v.detail << "uniform " << fmt(uniform, 12) << " (|V| = " << vocab.size() << "), memorized " << fmt(memorized)
           << ", random-model minimum " << fmt(lowest);
  return v;
}

Verdict determinism(const Desk& desk) {
  Verdict v;
  ScratchDir dir;
  auto plan = desk.plan;
  const auto cfg = desk.config("static");

  auto straight = init_training<float>(cfg, plan, 31);
  for (int e = 0; e < 4; ++e) train_epoch(desk.data, straight, plan);

  auto first = init_training<float>(cfg, plan, 31);
  for (int e = 0; e < 2; ++e) train_epoch(desk.data, first, plan);
  save_checkpoint(dir / "mid.ckpt", make_checkpoint(first, desk.vocab));
  auto resumed = restore_training(load_checkpoint<float>(dir / "mid.ckpt"));
  for (int e = 0; e < 2; ++e) train_epoch(desk.data, resumed, plan);

  bool same = straight.params.store.size() == resumed.params.store.size() &&
              straight.adam.step == resumed.adam.step && straight.rng.state() == resumed.rng.state();
  for (std::size_t i = 0; same && i < straight.params.store.size(); ++i) {
    same = straight.params.store[i].value == resumed.params.store[i].value &&
           straight.adam.m[i] == resumed.adam.m[i] && straight.adam.v[i] == resumed.adam.v[i];
  }
  v.require(same, "resumed state differs from uninterrupted run");
  save_checkpoint(dir / "a.ckpt", make_checkpoint(straight, desk.vocab));
  save_checkpoint(dir / "b.ckpt", make_checkpoint(resumed, desk.vocab));
  v.require(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"), "checkpoint files differ");

  // Same seed gives byte-identical TSV, from either model.
  auto write_gen = [&](TrainingState<float>& st, std::uint64_t seed, const std::string& name) {
    Rng rng(seed);
    save_corpus(dir / name, generate_corpus(st.params, st.config, desk.vocab, 100, rng),
                {"seed=" + std::to_string(seed)});
    return slurp(dir / name);
  };
  const auto g1 = write_gen(straight, 9, "g1.tsv");
  const auto g2 = write_gen(straight, 9, "g2.tsv");
  const auto g3 = write_gen(resumed, 9, "g3.tsv");
  const auto g4 = write_gen(straight, 10, "g4.tsv");
  v.require(g1 == g2, "same seed gave different TSV bytes");
  v.require(g1 == g3, "resumed model generates different text");
  v.require(g1 != g4, "different seeds gave identical output");
  v.detail << "2+2 epoch resume bit-identical, checkpoint bytes equal, " << g1.size() << "-byte TSV reproduced";
  return v;
}

std::multiset<std::vector<std::string>> texts(const LabeledCorpus& c) {
  std::multiset<std::vector<std::string>> out;
  for (const auto& s : c.sentences) out.insert(s.tokens);
  return out;
}

Verdict dataset_builders() {
  Verdict v;
  const auto base = make_synthetic_corpus(10, 1000, 20, {3, 8}, 4);
  const auto base_texts = texts(base);
  for (const auto& [variant, K] : std::vector<std::pair<IcqVariant, int>>{
           {IcqVariant::k1C, 1}, {IcqVariant::k2C, 2}, {IcqVariant::k5C, 5}, {IcqVariant::k10C, 10}}) {
    const auto q = build_icq_variant(base, variant);
    const std::string tag = to_string(variant);
    v.require(q.num_categories == K, tag + " has wrong K");
    v.require(texts(q) == base_texts, tag + " token multiset differs");
    // Each category is a union of whole (product, sentiment) cells of 1000.
    std::map<std::pair<int, int>, std::size_t> cells;
    for (std::size_t i = 0; i < q.sentences.size(); ++i) ++cells[{q.sentences[i].category, base.sentences[i].category}];
    std::set<int> seen;
    for (const auto& [key, n] : cells) {
      v.require(n == 1000, tag + " cell of size " + std::to_string(n));
      v.require(seen.insert(key.second).second, tag + " splits a cell");
    }
    v.require(seen.size() == 10, tag + " misses cells");
  }

  const auto products = make_synthetic_corpus(5, 2600, 10, {2, 6}, 6);
  std::vector<LabeledCorpus> series;
  for (int K = 2; K <= 5; ++K) {
    series.push_back(build_ica_series(products, K));
    v.require(series.back().category_counts() == std::vector<std::size_t>(static_cast<std::size_t>(K), 2000),
              "ICA-" + std::to_string(K) + "C counts");
  }
  for (std::size_t i = 0; i + 1 < series.size(); ++i) {
    std::multiset<LabeledSentence> small(series[i].sentences.begin(), series[i].sentences.end());
    std::multiset<LabeledSentence> big(series[i + 1].sentences.begin(), series[i + 1].sentences.end());
    v.require(std::includes(big.begin(), big.end(), small.begin(), small.end()),
              "ICA-" + std::to_string(i + 2) + "C not nested");
  }
  v.detail << "ICQ 1C/2C/5C/10C share 10000 sentences in cells of 1000; ICA 2C..5C nested at 2000 per product";
  return v;
}

Verdict parameter_accounting() {
  Verdict v;
  ModelConfig cfg;  // default widths
  std::vector<std::size_t> counts;
  for (int V : {10, 11, 40}) {
    cfg.vocab_size = V;
    Rng rng(3);
    const auto p = make_params<double>(cfg, rng);
    std::size_t n = 0;
    for (const auto& t : p.store) {
      for (Index r = 0; r < t.value.rows(); ++r) {
        for (Index c = 0; c < t.value.cols(); ++c) ++n;
      }
    }
    counts.push_back(n);
  }
  const std::size_t per_entry = counts[1] - counts[0];
  v.require(per_entry == 601, "coefficient " + std::to_string(per_entry));
  v.require(counts[2] - counts[0] == 601u * 30u, "count not linear in |V|");
  v.detail << "enumerated " << counts[0] << " / " << counts[1] << " / " << counts[2]
           << " scalars at |V| = 10 / 11 / 40: " << per_entry << " per entry";
  return v;
}

}  // namespace

int main() {
  DeskRuns desk;
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"gradient suite", gradient_suite},
      {"initialization invariants", init_invariants},
      {"category steering", [&] { return category_steering(desk); }},
      {"multi-task ordering", [&] { return multitask_ordering(desk); }},
      {"KL ablation direction", [&] { return kl_direction(desk); }},
      {"BLEU oracle equivalence", bleu_oracle},
      {"perplexity anchors", perplexity_anchors},
      {"determinism and resume", [&] { return determinism(desk.desk); }},
      {"dataset builders", dataset_builders},
      {"parameter accounting", parameter_accounting},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& [name, run] = criteria[i];
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    std::string line = (v.passed() ? "PASS " : "FAIL ") + std::to_string(i + 1) + " " + name + ": " + v.detail.str();
    for (const auto& f : v.failures) line += " | " + f;
    std::cout << line << std::endl;
    failed += !v.passed();
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
            << " criteria passed; desk training " << fmt(desk.seconds, 3) << " s" << std::endl;
  return failed == 0 ? 0 : 1;
}
