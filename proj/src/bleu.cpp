#include "catvrnn/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <unordered_map>

#include "catvrnn/errors.hpp"

namespace catvrnn {

namespace {

using Ids = std::vector<int>;

struct Interned {
  std::vector<Ids> cand;
  std::vector<Ids> refs;
};

Interned intern(const std::vector<TokenSentence>& c, const std::vector<TokenSentence>& r) {
  std::unordered_map<std::string, int> ids;
  auto convert = [&](const std::vector<TokenSentence>& in) {
    std::vector<Ids> out;
    out.reserve(in.size());
    for (const auto& s : in) {
      Ids row;
      row.reserve(s.size());
      for (const auto& w : s) row.push_back(ids.try_emplace(w, static_cast<int>(ids.size())).first->second);
      out.push_back(std::move(row));
    }
    return out;
  };
  Interned x;
  x.cand = convert(c);
  x.refs = convert(r);
  return x;
}

using Counts = std::map<Ids, int>;

Counts count_kgrams(const Ids& s, std::size_t k) {
  Counts c;
  if (s.size() < k) return c;
  for (std::size_t i = 0; i + k <= s.size(); ++i) ++c[Ids(s.begin() + i, s.begin() + i + k)];
  return c;
}

}  // namespace

NgramStats ngram_stats(const std::vector<TokenSentence>& candidates,
                       const std::vector<TokenSentence>& references, int n) {
  if (n < 1) throw ConfigError("BLEU order must be >= 1");
  if (candidates.empty()) throw DataError("BLEU: empty candidate corpus");
  if (references.empty()) throw DataError("BLEU: empty reference corpus");
  const auto x = intern(candidates, references);

  NgramStats s;
  s.clipped.assign(static_cast<std::size_t>(n), 0.0);
  s.total.assign(static_cast<std::size_t>(n), 0.0);
  for (std::size_t k = 1; k <= static_cast<std::size_t>(n); ++k) {
    Counts ref_max;
    for (const auto& r : x.refs) {
      for (const auto& [g, c] : count_kgrams(r, k)) {
        auto& m = ref_max[g];
        m = std::max(m, c);
      }
    }
    for (const auto& cand : x.cand) {
      for (const auto& [g, c] : count_kgrams(cand, k)) {
        s.total[k - 1] += c;
        auto it = ref_max.find(g);
        if (it != ref_max.end()) s.clipped[k - 1] += std::min(c, it->second);
      }
    }
  }

  std::vector<std::size_t> ref_lengths;
  for (const auto& r : x.refs) ref_lengths.push_back(r.size());
  std::sort(ref_lengths.begin(), ref_lengths.end());
  ref_lengths.erase(std::unique(ref_lengths.begin(), ref_lengths.end()), ref_lengths.end());
  for (const auto& cand : x.cand) {
    const std::size_t c = cand.size();
    s.candidate_length += static_cast<double>(c);
    // Smallest length >= c versus the largest length < c; ties go to the shorter.
    auto it = std::lower_bound(ref_lengths.begin(), ref_lengths.end(), c);
    std::size_t best;
    if (it == ref_lengths.end()) {
      best = ref_lengths.back();
    } else if (it == ref_lengths.begin()) {
      best = *it;
    } else {
      const std::size_t above = *it, below = *(it - 1);
      best = (c - below <= above - c) ? below : above;
    }
    s.reference_length += static_cast<double>(best);
  }
  return s;
}

double bleu_from_stats(const NgramStats& s) {
  if (s.candidate_length <= 0.0) return 0.0;
  double log_sum = 0.0;
  int orders = 0;
  for (std::size_t k = 0; k < s.total.size(); ++k) {
    if (s.total[k] <= 0.0) continue;
    const double matched = s.clipped[k] > 0.0 ? s.clipped[k] : kBleuEpsilon;
    log_sum += std::log(matched / s.total[k]);
    ++orders;
  }
  if (orders == 0) return 0.0;
  const double c = s.candidate_length, r = s.reference_length;
  const double log_bp = c > r ? 0.0 : 1.0 - r / c;
  return std::exp(log_sum / orders + log_bp);
}

double bleu_corpus(const std::vector<TokenSentence>& candidates,
                   const std::vector<TokenSentence>& references, int n) {
  return bleu_from_stats(ngram_stats(candidates, references, n));
}

double bleu_harmonic(double f, double b) {
  if (f < 0.0 || b < 0.0) throw InvariantError("BLEU scores must be non-negative");
  if (f == 0.0 && b == 0.0) return 0.0;
  return 2.0 * f * b / (f + b);
}

}  // namespace catvrnn
