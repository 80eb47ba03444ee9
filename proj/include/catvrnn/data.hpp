#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "catvrnn/errors.hpp"

namespace catvrnn {

inline constexpr int kPadId = 0;  // also the start token
inline constexpr int kUnkId = 1;
inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kUnkToken = "<unk>";

/// Token <-> id map with PAD = 0 and UNK = 1 reserved.
class Vocabulary {
 public:
  Vocabulary();

  /// Rebuilds a vocabulary from its id-ordered token list (specials included).
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  int id(const std::string& token) const;  // UNK for unknown words
  const std::string& token(int id) const;
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Stable hex digest of the id -> token assignment.
  std::string digest() const;

  int add(const std::string& token);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct LabeledSentence {
  std::vector<std::string> tokens;
  int category = 0;

  bool operator==(const LabeledSentence&) const = default;
  auto operator<=>(const LabeledSentence&) const = default;
};

struct LabeledCorpus {
  std::vector<LabeledSentence> sentences;
  int num_categories = 0;
  std::string provenance;
  std::uint64_t seed = 0;

  std::vector<std::size_t> category_counts() const;
  void validate() const;
};

/// Teacher-forcing view of a set of sentences, every row of length T.
///
/// inputs[b]  = [PAD, w_1 .. w_S, PAD ...]
/// targets[b] = [w_1 .. w_S, PAD ...]
struct Batch {
  std::vector<std::vector<int>> inputs;
  std::vector<std::vector<int>> targets;
  std::vector<int> lengths;
  std::vector<int> categories;

  std::size_t size() const { return inputs.size(); }
  /// Rows `order[begin, end)` as a new batch.
  Batch select(const std::vector<std::size_t>& order, std::size_t begin, std::size_t end) const;
};

/// Reads "category<TAB>space separated tokens" lines. Blank lines and lines
/// starting with '#' are skipped. K is inferred as max id + 1 unless
/// `num_categories` > 0. Empty texts are rejected unless `allow_empty`
/// (generated files may hold sentences that ended immediately).
LabeledCorpus load_corpus(const std::filesystem::path& path, int num_categories = 0,
                          bool allow_empty = false);
LabeledCorpus parse_corpus(std::istream& in, const std::string& source, int num_categories = 0,
                           bool allow_empty = false);

/// Writes the TSV exchange format. `header` lines are emitted as '# ' comments.
void save_corpus(const std::filesystem::path& path, const LabeledCorpus& corpus,
                 const std::vector<std::string>& header = {});

std::vector<std::string> split_tokens(const std::string& text);

/// Keeps sentences with min_len <= length <= max_len (inclusive).
LabeledCorpus filter_by_length(const LabeledCorpus& corpus, int min_len = 15, int max_len = 30);

/// Seeded random selection of at most `per_category` sentences per category.
/// Relative order of the kept sentences is preserved.
LabeledCorpus subsample_per_category(const LabeledCorpus& corpus, std::size_t per_category,
                                     std::uint64_t seed);

/// Frequency-descending, then lexicographic, id assignment after the specials.
Vocabulary build_vocabulary(const LabeledCorpus& corpus, int min_freq = 1);

Batch encode_batch(const std::vector<LabeledSentence>& sentences, const Vocabulary& vocab, int T);
std::vector<int> encode_tokens(const std::vector<std::string>& tokens, const Vocabulary& vocab);

/// Maps ids back to words, stopping at the first PAD.
std::vector<std::string> decode(const std::vector<int>& ids, const Vocabulary& vocab);

enum class IcqVariant { k1C, k2C, k5C, k10C };
IcqVariant parse_icq_variant(const std::string& name);
std::string to_string(IcqVariant v);
int icq_num_categories(IcqVariant v);

/// Relabels a 10-cell base corpus whose category id is product * 2 + sentiment
/// (5 products x 2 sentiments, 1000 sentences per cell).
LabeledCorpus build_icq_variant(const LabeledCorpus& base, IcqVariant variant,
                                std::size_t per_cell = 1000);

/// ICA-KC: the first `per_product` sentences of products 0 .. K-1, where the
/// product id is the base category id.
LabeledCorpus build_ica_series(const LabeledCorpus& products, int K,
                               std::size_t per_product = 2000);

/// Random sentences whose words come only from their category's private
/// vocabulary ("c<k>w<i>").
LabeledCorpus make_synthetic_corpus(int K, std::size_t per_cat, int vocab_per_cat,
                                    std::pair<int, int> len_range, std::uint64_t seed);

/// Category whose private synthetic vocabulary holds most of the tokens; ties
/// and unrecognized words resolve to -1.
int synthetic_oracle_category(const std::vector<std::string>& tokens);

/// counts per category, vocab size, seed, provenance.
nlohmann::json corpus_manifest(const LabeledCorpus& corpus, const Vocabulary& vocab);

}  // namespace catvrnn
