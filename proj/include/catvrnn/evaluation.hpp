#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "catvrnn/bleu.hpp"
#include "catvrnn/classifier.hpp"
#include "catvrnn/data.hpp"
#include "catvrnn/model.hpp"

namespace catvrnn {

struct PerplexityResult {
  double perplexity = 0.0;
  double mean_nll = 0.0;
  double scored_tokens = 0.0;
};

/// exp(mean cross-entropy) under teacher forcing. Scored positions are the
/// real tokens plus one terminating PAD per sentence; sentences longer than
/// T are truncated.
template <typename Scalar>
PerplexityResult perplexity(CatVrnnParams<Scalar>& p, const ModelConfig& cfg,
                            const std::vector<LabeledSentence>& sentences, const Vocabulary& vocab,
                            Rng& rng, std::size_t batch_size = 64) {
  if (sentences.empty()) throw DataError("perplexity: empty corpus");
  if (vocab.size() != cfg.vocab_size) throw ConfigError("perplexity: vocabulary size mismatch");
  double nll = 0.0, scored = 0.0;
  for (std::size_t begin = 0; begin < sentences.size(); begin += batch_size) {
    const std::size_t end = std::min(sentences.size(), begin + batch_size);
    std::vector<LabeledSentence> chunk(sentences.begin() + static_cast<std::ptrdiff_t>(begin),
                                       sentences.begin() + static_cast<std::ptrdiff_t>(end));
    for (auto& s : chunk) {
      if (s.tokens.size() > static_cast<std::size_t>(cfg.max_len)) s.tokens.resize(static_cast<std::size_t>(cfg.max_len));
    }
    const Batch b = encode_batch(chunk, vocab, cfg.max_len);
    Tape<Scalar> tape(false);
    const auto fwd = forward_teacher(tape, b.inputs, b.categories, p, cfg, Phase::kEval, rng);
    const auto w = target_weights(b.targets, true);
    std::vector<int> column(b.size());
    for (std::size_t t = 0; t < fwd.step_logits.size(); ++t) {
      for (std::size_t r = 0; r < b.size(); ++r) column[r] = b.targets[r][t];
      const auto ce = cross_entropy_rows(fwd.step_logits[t], column);
      for (std::size_t r = 0; r < b.size(); ++r) {
        nll += w[r][t] * static_cast<double>(ce.value()(static_cast<Index>(r), 0));
        scored += w[r][t];
      }
    }
  }
  PerplexityResult out;
  out.scored_tokens = scored;
  out.mean_nll = nll / scored;
  out.perplexity = std::exp(out.mean_nll);
  return out;
}

/// Fraction of sentences the classifier assigns to their intended category.
double category_accuracy(CnnClassifier& clf, const LabeledCorpus& generated, const Vocabulary& vocab);

struct MetricsReport {
  std::optional<double> category_accuracy;
  std::optional<double> perplexity;
  std::map<int, double> bleu_f;
  std::map<int, double> bleu_b;
  std::map<int, double> bleu_ha;
  std::size_t generated_sentences = 0;
  std::size_t bleu_b_references = 0;
  bool bleu_b_subsampled = false;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();

  /// Throws InvariantError when a field is outside its valid range.
  void validate() const;
};

void to_json(nlohmann::json& j, const MetricsReport& r);

struct EvalOptions {
  std::size_t samples_per_category = 5000;
  std::vector<int> bleu_orders{2, 3, 4, 5};
  std::size_t bleu_b_max_references = 5000;
  std::uint64_t seed = 0;
};

/// BLEU_F (generated against real), BLEU_B (real against generated) and their
/// harmonic mean, plus category accuracy when a classifier is given.
MetricsReport score_generated(const LabeledCorpus& generated, const LabeledCorpus& real,
                              CnnClassifier* clf, const Vocabulary& vocab, const EvalOptions& opts);

/// Generates `samples_per_category` sentences for every category and scores
/// them; perplexity is measured on `real`.
template <typename Scalar>
LabeledCorpus generate_corpus(CatVrnnParams<Scalar>& p, const ModelConfig& cfg,
                              const Vocabulary& vocab, std::size_t per_category, Rng& rng) {
  LabeledCorpus out;
  out.num_categories = cfg.num_categories;
  out.seed = rng.seed();
  out.provenance = "generated";
  for (int c = 0; c < cfg.num_categories; ++c) {
    for (const auto& ids : generate(c, per_category, p, cfg, rng)) {
      out.sentences.push_back({decode(ids, vocab), c});
    }
  }
  return out;
}

template <typename Scalar>
MetricsReport eval_report(CatVrnnParams<Scalar>& p, const ModelConfig& cfg, const Vocabulary& vocab,
                          const LabeledCorpus& real, CnnClassifier* clf, const EvalOptions& opts) {
  Rng rng(opts.seed);
  const auto generated = generate_corpus(p, cfg, vocab, opts.samples_per_category, rng);
  MetricsReport r = score_generated(generated, real, clf, vocab, opts);
  r.perplexity = perplexity(p, cfg, real.sentences, vocab, rng).perplexity;
  r.config["model"] = cfg;
  r.validate();
  return r;
}

}  // namespace catvrnn
