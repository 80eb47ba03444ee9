#include "catvrnn/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace catvrnn {

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  add(kPadToken);
  add(kUnkToken);
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnkToken) {
    throw FormatError("vocabulary token list must start with <pad>, <unk>");
  }
  Vocabulary v;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw FormatError("duplicate vocabulary token '" + tokens[i] + "'");
    v.add(tokens[i]);
  }
  return v;
}

int Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw InvariantError("token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::string Vocabulary::digest() const {
  uLong crc = crc32(0L, Z_NULL, 0);
  for (const auto& t : tokens_) {
    crc = crc32(crc, reinterpret_cast<const Bytef*>(t.data()), static_cast<uInt>(t.size()));
    const Bytef sep = '\n';
    crc = crc32(crc, &sep, 1);
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%08lx-%d", static_cast<unsigned long>(crc), size());
  return buf;
}

// ---------------------------------------------------------------------------
// Corpus

std::vector<std::size_t> LabeledCorpus::category_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(num_categories, 0)), 0);
  for (const auto& s : sentences) {
    if (s.category >= 0 && s.category < num_categories) ++counts[static_cast<std::size_t>(s.category)];
  }
  return counts;
}

void LabeledCorpus::validate() const {
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto& s = sentences[i];
    if (s.category < 0 || s.category >= num_categories) {
      throw DataError("sentence " + std::to_string(i) + " has category " +
                      std::to_string(s.category) + " outside [0, " +
                      std::to_string(num_categories) + ")");
    }
    if (s.tokens.empty()) throw DataError("sentence " + std::to_string(i) + " is empty");
    for (const auto& t : s.tokens) {
      if (t == kPadToken) throw DataError("sentence " + std::to_string(i) + " contains <pad>");
    }
  }
}

Batch Batch::select(const std::vector<std::size_t>& order, std::size_t begin,
                    std::size_t end) const {
  Batch out;
  for (std::size_t i = begin; i < end; ++i) {
    const std::size_t r = order[i];
    out.inputs.push_back(inputs[r]);
    out.targets.push_back(targets[r]);
    out.lengths.push_back(lengths[r]);
    out.categories.push_back(categories[r]);
  }
  return out;
}

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

LabeledCorpus parse_corpus(std::istream& in, const std::string& source, int num_categories,
                           bool allow_empty) {
  LabeledCorpus corpus;
  corpus.provenance = source;
  std::string line;
  std::size_t lineno = 0;
  int max_id = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto where = source + ":" + std::to_string(lineno);
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(where + ": missing TAB separator");
    const std::string label = line.substr(0, tab);
    int category = 0;
    try {
      std::size_t used = 0;
      category = std::stoi(label, &used);
      if (used != label.size()) throw std::invalid_argument(label);
    } catch (const std::exception&) {
      throw DataError(where + ": category '" + label + "' is not an integer");
    }
    if (category < 0) throw DataError(where + ": negative category " + label);
    auto tokens = split_tokens(line.substr(tab + 1));
    if (tokens.empty() && !allow_empty) throw DataError(where + ": empty text");
    for (const auto& t : tokens) {
      if (t == kPadToken) throw DataError(where + ": text contains the reserved token <pad>");
    }
    max_id = std::max(max_id, category);
    corpus.sentences.push_back({std::move(tokens), category});
  }
  corpus.num_categories = num_categories > 0 ? num_categories : max_id + 1;
  if (max_id >= corpus.num_categories) {
    throw DataError(source + ": category " + std::to_string(max_id) + " exceeds K = " +
                    std::to_string(corpus.num_categories));
  }
  return corpus;
}

LabeledCorpus load_corpus(const std::filesystem::path& path, int num_categories, bool allow_empty) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read corpus file " + path.string());
  return parse_corpus(in, path.string(), num_categories, allow_empty);
}

void save_corpus(const std::filesystem::path& path, const LabeledCorpus& corpus,
                 const std::vector<std::string>& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file " + path.string());
  for (const auto& h : header) out << "# " << h << '\n';
  for (const auto& s : corpus.sentences) {
    out << s.category << '\t';
    for (std::size_t i = 0; i < s.tokens.size(); ++i) out << (i ? " " : "") << s.tokens[i];
    out << '\n';
  }
}

LabeledCorpus filter_by_length(const LabeledCorpus& corpus, int min_len, int max_len) {
  if (min_len > max_len) {
    throw DataError("filter_by_length: min " + std::to_string(min_len) + " > max " +
                    std::to_string(max_len));
  }
  LabeledCorpus out;
  out.num_categories = corpus.num_categories;
  out.seed = corpus.seed;
  out.provenance = corpus.provenance + "|len" + std::to_string(min_len) + ":" + std::to_string(max_len);
  for (const auto& s : corpus.sentences) {
    const int n = static_cast<int>(s.tokens.size());
    if (n >= min_len && n <= max_len) out.sentences.push_back(s);
  }
  return out;
}

LabeledCorpus subsample_per_category(const LabeledCorpus& corpus, std::size_t per_category,
                                     std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_cat(static_cast<std::size_t>(corpus.num_categories));
  for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
    by_cat[static_cast<std::size_t>(corpus.sentences[i].category)].push_back(i);
  }
  std::mt19937_64 engine(seed);
  std::vector<std::size_t> keep;
  for (auto& idx : by_cat) {
    std::shuffle(idx.begin(), idx.end(), engine);
    if (idx.size() > per_category) idx.resize(per_category);
    keep.insert(keep.end(), idx.begin(), idx.end());
  }
  std::sort(keep.begin(), keep.end());
  LabeledCorpus out;
  out.num_categories = corpus.num_categories;
  out.seed = seed;
  out.provenance = corpus.provenance + "|sample" + std::to_string(per_category);
  for (std::size_t i : keep) out.sentences.push_back(corpus.sentences[i]);
  return out;
}

Vocabulary build_vocabulary(const LabeledCorpus& corpus, int min_freq) {
  if (corpus.sentences.empty()) throw DataError("build_vocabulary: empty corpus");
  std::map<std::string, std::size_t> freq;
  for (const auto& s : corpus.sentences) {
    for (const auto& t : s.tokens) ++freq[t];
  }
  std::vector<std::pair<std::string, std::size_t>> entries(freq.begin(), freq.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (const auto& [tok, n] : entries) {
    if (n >= static_cast<std::size_t>(std::max(min_freq, 1))) v.add(tok);
  }
  return v;
}

std::vector<int> encode_tokens(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id(t));
  return ids;
}

Batch encode_batch(const std::vector<LabeledSentence>& sentences, const Vocabulary& vocab, int T) {
  Batch b;
  for (const auto& s : sentences) {
    const int S = static_cast<int>(s.tokens.size());
    if (S > T) {
      throw DataError("sentence of length " + std::to_string(S) + " exceeds T = " + std::to_string(T));
    }
    std::vector<int> in(static_cast<std::size_t>(T), kPadId);
    std::vector<int> tgt(static_cast<std::size_t>(T), kPadId);
    const auto ids = encode_tokens(s.tokens, vocab);
    for (int i = 0; i < S; ++i) {
      tgt[static_cast<std::size_t>(i)] = ids[static_cast<std::size_t>(i)];
      if (i + 1 < T) in[static_cast<std::size_t>(i + 1)] = ids[static_cast<std::size_t>(i)];
    }
    b.inputs.push_back(std::move(in));
    b.targets.push_back(std::move(tgt));
    b.lengths.push_back(S);
    b.categories.push_back(s.category);
  }
  return b;
}

std::vector<std::string> decode(const std::vector<int>& ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (int id : ids) {
    if (id == kPadId) break;
    out.push_back(vocab.token(id));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset deformations

IcqVariant parse_icq_variant(const std::string& name) {
  std::string n;
  for (char c : name) n.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (n.rfind("icq-", 0) == 0) n = n.substr(4);
  if (n == "1c") return IcqVariant::k1C;
  if (n == "2c") return IcqVariant::k2C;
  if (n == "5c") return IcqVariant::k5C;
  if (n == "10c") return IcqVariant::k10C;
  throw DataError("unknown ICQ variant '" + name + "' (expected 1c, 2c, 5c or 10c)");
}

std::string to_string(IcqVariant v) {
  switch (v) {
    case IcqVariant::k1C: return "ICQ-1C";
    case IcqVariant::k2C: return "ICQ-2C";
    case IcqVariant::k5C: return "ICQ-5C";
    case IcqVariant::k10C: return "ICQ-10C";
  }
  return "ICQ-?";
}

int icq_num_categories(IcqVariant v) {
  switch (v) {
    case IcqVariant::k1C: return 1;
    case IcqVariant::k2C: return 2;
    case IcqVariant::k5C: return 5;
    case IcqVariant::k10C: return 10;
  }
  return 0;
}

LabeledCorpus build_icq_variant(const LabeledCorpus& base, IcqVariant variant,
                                std::size_t per_cell) {
  if (base.num_categories != 10) {
    throw DataError("ICQ base must have 10 (product, sentiment) cells, got K = " +
                    std::to_string(base.num_categories));
  }
  const auto counts = base.category_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] != per_cell) {
      throw DataError("ICQ base cell " + std::to_string(c) + " has " + std::to_string(counts[c]) +
                      " sentences, expected " + std::to_string(per_cell));
    }
  }
  LabeledCorpus out;
  out.num_categories = icq_num_categories(variant);
  out.seed = base.seed;
  out.provenance = to_string(variant);
  out.sentences = base.sentences;
  for (auto& s : out.sentences) {
    const int product = s.category / 2;
    const int sentiment = s.category % 2;
    switch (variant) {
      case IcqVariant::k1C: s.category = 0; break;
      case IcqVariant::k2C: s.category = sentiment; break;
      case IcqVariant::k5C: s.category = product; break;
      case IcqVariant::k10C: break;
    }
  }
  return out;
}

LabeledCorpus build_ica_series(const LabeledCorpus& products, int K, std::size_t per_product) {
  if (K < 2 || K > products.num_categories) {
    throw DataError("ICA: K = " + std::to_string(K) + " must lie in [2, " +
                    std::to_string(products.num_categories) + "]");
  }
  std::vector<std::size_t> taken(static_cast<std::size_t>(K), 0);
  LabeledCorpus out;
  out.num_categories = K;
  out.seed = products.seed;
  out.provenance = "ICA-" + std::to_string(K) + "C";
  for (const auto& s : products.sentences) {
    if (s.category >= K) continue;
    auto& n = taken[static_cast<std::size_t>(s.category)];
    if (n < per_product) {
      out.sentences.push_back(s);
      ++n;
    }
  }
  for (int k = 0; k < K; ++k) {
    if (taken[static_cast<std::size_t>(k)] < per_product) {
      throw DataError("ICA: product " + std::to_string(k) + " has only " +
                      std::to_string(taken[static_cast<std::size_t>(k)]) + " sentences, need " +
                      std::to_string(per_product));
    }
  }
  return out;
}

LabeledCorpus make_synthetic_corpus(int K, std::size_t per_cat, int vocab_per_cat,
                                    std::pair<int, int> len_range, std::uint64_t seed) {
  if (K < 1 || vocab_per_cat < 1 || len_range.first < 1 || len_range.first > len_range.second) {
    throw DataError("make_synthetic_corpus: invalid arguments");
  }
  std::mt19937_64 engine(seed);
  std::uniform_int_distribution<int> len_dist(len_range.first, len_range.second);
  std::uniform_int_distribution<int> word_dist(0, vocab_per_cat - 1);
  LabeledCorpus out;
  out.num_categories = K;
  out.seed = seed;
  out.provenance = "synthetic";
  for (int k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < per_cat; ++i) {
      LabeledSentence s;
      s.category = k;
      const int n = len_dist(engine);
      for (int j = 0; j < n; ++j) {
        s.tokens.push_back("c" + std::to_string(k) + "w" + std::to_string(word_dist(engine)));
      }
      out.sentences.push_back(std::move(s));
    }
  }
  return out;
}

int synthetic_oracle_category(const std::vector<std::string>& tokens) {
  std::map<int, int> votes;
  for (const auto& t : tokens) {
    if (t.size() < 4 || t[0] != 'c') continue;
    const auto w = t.find('w', 1);
    if (w == std::string::npos || w == 1) continue;
    try {
      ++votes[std::stoi(t.substr(1, w - 1))];
    } catch (const std::exception&) {
    }
  }
  int best = -1, best_votes = 0;
  bool tie = false;
  for (const auto& [k, n] : votes) {
    if (n > best_votes) {
      best = k;
      best_votes = n;
      tie = false;
    } else if (n == best_votes) {
      tie = true;
    }
  }
  return tie ? -1 : best;
}

nlohmann::json corpus_manifest(const LabeledCorpus& corpus, const Vocabulary& vocab) {
  nlohmann::json j;
  j["provenance"] = corpus.provenance;
  j["seed"] = corpus.seed;
  j["num_categories"] = corpus.num_categories;
  j["num_sentences"] = corpus.sentences.size();
  j["counts_per_category"] = corpus.category_counts();
  j["vocab_size"] = vocab.size();
  j["vocab_digest"] = vocab.digest();
  return j;
}

}  // namespace catvrnn
