#include "catvrnn/evaluation.hpp"

#include <algorithm>

namespace catvrnn {

double category_accuracy(CnnClassifier& clf, const LabeledCorpus& generated, const Vocabulary& vocab) {
  if (generated.sentences.empty()) throw DataError("category_accuracy: no sentences");
  if (vocab.size() != clf.config.vocab_size) {
    throw ConfigError("category_accuracy: classifier vocabulary size mismatch");
  }
  std::vector<std::vector<int>> x;
  x.reserve(generated.sentences.size());
  for (const auto& s : generated.sentences) {
    if (s.category < 0 || s.category >= clf.config.num_categories) {
      throw ConfigError("category_accuracy: intended category " + std::to_string(s.category) +
                        " outside classifier range");
    }
    x.push_back(encode_tokens(s.tokens, vocab));
  }
  const auto pred = classifier_predict(clf, x);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == generated.sentences[i].category;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

void MetricsReport::validate() const {
  if (category_accuracy && !(*category_accuracy >= 0.0 && *category_accuracy <= 1.0)) {
    throw InvariantError("category accuracy outside [0, 1]");
  }
  if (perplexity && !(*perplexity >= 1.0)) throw InvariantError("perplexity below 1");
  for (const auto& [n, ha] : bleu_ha) {
    const double f = bleu_f.at(n), b = bleu_b.at(n);
    for (double v : {f, b, ha}) {
      if (!(v >= 0.0 && v <= 1.0 + 1e-12)) throw InvariantError("BLEU outside [0, 1]");
    }
    const double tol = 1e-12;
    if (ha < std::min(f, b) - tol || ha > std::max(f, b) + tol) {
      throw InvariantError("harmonic BLEU outside [min, max] of its inputs");
    }
  }
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  auto by_order = [](const std::map<int, double>& m) {
    nlohmann::json o = nlohmann::json::object();
    for (const auto& [n, v] : m) o[std::to_string(n)] = v;
    return o;
  };
  j = nlohmann::json{{"category_accuracy", nullptr},
                     {"perplexity", nullptr},
                     {"bleu_f", by_order(r.bleu_f)},
                     {"bleu_b", by_order(r.bleu_b)},
                     {"bleu_ha", by_order(r.bleu_ha)},
                     {"generated_sentences", r.generated_sentences},
                     {"bleu_b_references", r.bleu_b_references},
                     {"bleu_b_subsampled", r.bleu_b_subsampled},
                     {"seed", r.seed},
                     {"config", r.config}};
  if (r.category_accuracy) j["category_accuracy"] = *r.category_accuracy;
  if (r.perplexity) j["perplexity"] = *r.perplexity;
}

MetricsReport score_generated(const LabeledCorpus& generated, const LabeledCorpus& real,
                              CnnClassifier* clf, const Vocabulary& vocab, const EvalOptions& opts) {
  if (generated.sentences.empty()) throw DataError("no generated sentences to score");
  if (real.sentences.empty()) throw DataError("empty reference corpus");
  if (opts.bleu_orders.empty()) throw ConfigError("no BLEU orders requested");
  MetricsReport r;
  r.seed = opts.seed;
  r.generated_sentences = generated.sentences.size();
  if (clf) r.category_accuracy = category_accuracy(*clf, generated, vocab);

  std::vector<TokenSentence> gen, refs;
  for (const auto& s : generated.sentences) gen.push_back(s.tokens);
  std::vector<LabeledSentence> pool = real.sentences;
  if (opts.bleu_b_max_references > 0 && pool.size() > opts.bleu_b_max_references) {
    std::mt19937_64 engine(opts.seed ^ 0x5bd1e995ULL);
    std::shuffle(pool.begin(), pool.end(), engine);
    pool.resize(opts.bleu_b_max_references);
    r.bleu_b_subsampled = true;
  }
  std::vector<TokenSentence> all_refs, b_refs;
  for (const auto& s : real.sentences) all_refs.push_back(s.tokens);
  for (const auto& s : pool) b_refs.push_back(s.tokens);
  r.bleu_b_references = b_refs.size();

  const int max_order = *std::max_element(opts.bleu_orders.begin(), opts.bleu_orders.end());
  const NgramStats fwd = ngram_stats(gen, all_refs, max_order);
  const NgramStats bwd = ngram_stats(b_refs, gen, max_order);
  auto truncated = [](NgramStats s, int n) {
    s.clipped.resize(static_cast<std::size_t>(n));
    s.total.resize(static_cast<std::size_t>(n));
    return s;
  };
  for (int n : opts.bleu_orders) {
    if (n < 1) throw ConfigError("BLEU order must be >= 1");
    r.bleu_f[n] = bleu_from_stats(truncated(fwd, n));
    r.bleu_b[n] = bleu_from_stats(truncated(bwd, n));
    r.bleu_ha[n] = bleu_harmonic(r.bleu_f[n], r.bleu_b[n]);
  }
  r.config["samples_per_category"] = opts.samples_per_category;
  r.config["bleu_b_max_references"] = opts.bleu_b_max_references;
  r.validate();
  return r;
}

}  // namespace catvrnn
