#pragma once

#include <string>
#include <vector>

namespace catvrnn {

using TokenSentence = std::vector<std::string>;

inline constexpr double kBleuEpsilon = 1e-9;

/// Sufficient statistics of corpus BLEU-n. Index k-1 holds k-gram counts.
struct NgramStats {
  std::vector<double> clipped;  // candidate k-grams matched, clipped per reference maximum
  std::vector<double> total;    // candidate k-grams
  double candidate_length = 0.0;
  double reference_length = 0.0;  // sum of closest reference lengths
};

/// Counts are clipped by the largest count of that k-gram in any single
/// reference; the effective reference length of a candidate is the closest
/// reference length (ties towards the shorter one).
NgramStats ngram_stats(const std::vector<TokenSentence>& candidates,
                       const std::vector<TokenSentence>& references, int n);

/// Geometric mean of modified precisions times the brevity penalty. Zero
/// matched counts are floored at kBleuEpsilon; orders with no candidate
/// k-grams at all are left out of the mean.
double bleu_from_stats(const NgramStats& s);

double bleu_corpus(const std::vector<TokenSentence>& candidates,
                   const std::vector<TokenSentence>& references, int n);

/// 2fb/(f+b), with 0 when both are 0.
double bleu_harmonic(double f, double b);

}  // namespace catvrnn
