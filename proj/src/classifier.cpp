#include "catvrnn/classifier.hpp"

#include <cmath>

namespace catvrnn {

void ClassifierConfig::validate() const {
  if (vocab_size < 2) throw ConfigError("classifier vocab_size must be >= 2");
  if (num_categories < 2) throw ConfigError("classifier needs at least two categories");
  if (embed_dim < 1 || feature_maps < 1) throw ConfigError("classifier dims must be >= 1");
  if (widths.empty()) throw ConfigError("classifier needs at least one window width");
  for (int w : widths) {
    if (w < 1 || w > max_len) {
      throw ConfigError("window width " + std::to_string(w) + " outside [1, max_len]");
    }
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (max_epochs < 1 || batch_size < 1 || patience < 1) {
    throw ConfigError("classifier epochs, batch size and patience must be >= 1");
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must be in (0, 1)");
  }
}

void to_json(nlohmann::json& j, const ClassifierConfig& c) {
  j = nlohmann::json{{"vocab_size", c.vocab_size},     {"num_categories", c.num_categories},
                     {"embed_dim", c.embed_dim},       {"widths", c.widths},
                     {"feature_maps", c.feature_maps}, {"dropout", c.dropout},
                     {"max_len", c.max_len},           {"max_epochs", c.max_epochs},
                     {"patience", c.patience},         {"batch_size", c.batch_size},
                     {"lr", c.lr},                     {"validation_fraction", c.validation_fraction}};
}

void from_json(const nlohmann::json& j, ClassifierConfig& c) {
  c = ClassifierConfig{};
  c.vocab_size = j.at("vocab_size").get<int>();
  c.num_categories = j.at("num_categories").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.widths = j.at("widths").get<std::vector<int>>();
  c.feature_maps = j.at("feature_maps").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.max_len = j.at("max_len").get<int>();
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
}

CnnClassifier make_classifier(const ClassifierConfig& cfg, Rng& rng) {
  cfg.validate();
  CnnClassifier clf;
  clf.config = cfg;
  clf.embedding = clf.store.add("embedding", {cfg.vocab_size, cfg.embed_dim});
  clf.store[clf.embedding].value = rng.uniform<float>("params", cfg.vocab_size, cfg.embed_dim, -0.25, 0.25);
  for (int w : cfg.widths) {
    clf.convs.push_back(add_dense(clf.store, "conv" + std::to_string(w), Index{w} * cfg.embed_dim,
                                  cfg.feature_maps, rng));
  }
  clf.head = add_dense(clf.store, "head",
                       static_cast<Index>(cfg.widths.size()) * cfg.feature_maps,
                       cfg.num_categories, rng);
  return clf;
}

Var<float> classifier_forward(Tape<float>& tape, CnnClassifier& clf,
                              const std::vector<std::vector<int>>& sentences, Rng* dropout_rng) {
  const auto& cfg = clf.config;
  const Index B = static_cast<Index>(sentences.size());
  const Index L = cfg.max_len;
  if (B == 0) throw ConfigError("classifier_forward: empty batch");
  std::vector<int> flat(static_cast<std::size_t>(B * L), kPadId);
  for (Index b = 0; b < B; ++b) {
    const auto& s = sentences[static_cast<std::size_t>(b)];
    const Index n = std::min<Index>(L, static_cast<Index>(s.size()));
    std::copy(s.begin(), s.begin() + n, flat.begin() + b * L);
  }
  const auto emb = embedding(tape, clf.store[clf.embedding], flat);
  std::optional<Var<float>> features;
  for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
    const Index w = cfg.widths[i];
    const auto windows = unfold_windows(emb, B, L, w);
    const auto pooled = group_max(relu(dense(windows, clf.store, clf.convs[i])), L - w + 1);
    features = features ? concat_cols(*features, pooled) : pooled;
  }
  Var<float> f = *features;
  if (dropout_rng && cfg.dropout > 0.0) {
    const Matrix<float> u = dropout_rng->uniform<float>("dropout", f.rows(), f.cols());
    const float keep = static_cast<float>(1.0 - cfg.dropout);
    const Matrix<float> mask = (u.array() < keep).cast<float>() / keep;
    f = f * tape.constant(mask);
  }
  return log_softmax_rows(dense(f, clf.store, clf.head));
}

std::vector<int> classifier_predict(CnnClassifier& clf, const std::vector<std::vector<int>>& sentences) {
  std::vector<int> out;
  out.reserve(sentences.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t begin = 0; begin < sentences.size(); begin += kChunk) {
    const std::size_t end = std::min(sentences.size(), begin + kChunk);
    const std::vector<std::vector<int>> chunk(sentences.begin() + static_cast<std::ptrdiff_t>(begin),
                                              sentences.begin() + static_cast<std::ptrdiff_t>(end));
    Tape<float> tape(false);
    const auto logp = classifier_forward(tape, clf, chunk, nullptr);
    for (Index r = 0; r < logp.rows(); ++r) {
      Index best = 0;
      logp.value().row(r).maxCoeff(&best);
      out.push_back(static_cast<int>(best));
    }
  }
  return out;
}

namespace {

double accuracy_on(CnnClassifier& clf, const std::vector<std::vector<int>>& x,
                   const std::vector<int>& y) {
  const auto pred = classifier_predict(clf, x);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += pred[i] == y[i];
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

}  // namespace

CnnClassifier train_eval_classifier(const LabeledCorpus& corpus, const Vocabulary& vocab,
                                    ClassifierConfig cfg, std::uint64_t seed,
                                    ClassifierTrainReport* report) {
  corpus.validate();
  const auto counts = corpus.category_counts();
  const auto populated = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
  if (corpus.num_categories < 2 || populated < 2) {
    throw DataError("classifier training needs at least two populated categories");
  }
  if (corpus.sentences.size() < 3) throw DataError("classifier training needs at least 3 sentences");
  cfg.vocab_size = vocab.size();
  cfg.num_categories = corpus.num_categories;
  Rng rng(seed);
  CnnClassifier clf = make_classifier(cfg, rng);

  // Held-out validation split; early stopping watches a separate dev slice of
  // the training portion so the reported accuracy is not selected on.
  std::vector<std::size_t> order(corpus.sentences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng.stream("split"));
  const std::size_t n = order.size();
  const std::size_t n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(cfg.validation_fraction * static_cast<double>(n))), 1, n - 2);
  const std::size_t n_dev = std::max<std::size_t>(1, (n - n_val) / 10);

  auto gather = [&](std::size_t begin, std::size_t end, std::vector<std::vector<int>>& x,
                    std::vector<int>& y) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& s = corpus.sentences[order[i]];
      x.push_back(encode_tokens(s.tokens, vocab));
      y.push_back(s.category);
    }
  };
  std::vector<std::vector<int>> x_val, x_dev, x_train;
  std::vector<int> y_val, y_dev, y_train;
  gather(0, n_val, x_val, y_val);
  gather(n_val, n_val + n_dev, x_dev, y_dev);
  gather(n_val + n_dev, n, x_train, y_train);

  AdamState<float> adam;
  adam.options.lr = cfg.lr;
  ParamStore<float> best = clf.store;
  double best_dev = -1.0;
  int best_epoch = 0, stale = 0;
  std::vector<std::size_t> idx(x_train.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), rng.stream("shuffle"));
    for (std::size_t begin = 0; begin < idx.size(); begin += bs) {
      const std::size_t end = std::min(idx.size(), begin + bs);
      std::vector<std::vector<int>> xb;
      std::vector<int> yb;
      for (std::size_t i = begin; i < end; ++i) {
        xb.push_back(x_train[idx[i]]);
        yb.push_back(y_train[idx[i]]);
      }
      clf.store.zero_grad();
      Tape<float> tape;
      const auto logp = classifier_forward(tape, clf, xb, &rng);
      const auto loss = sum(0.0f - pick(logp, yb)) * (1.0f / static_cast<float>(yb.size()));
      tape.backward(loss);
      adam_step(clf.store, adam);
    }
    clf.store.drop_grad();
    const double dev = accuracy_on(clf, x_dev, y_dev);
    if (dev > best_dev) {
      best_dev = dev;
      best = clf.store;
      best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  clf.store = std::move(best);
  clf.epochs_trained = best_epoch;
  clf.validation_accuracy = accuracy_on(clf, x_val, y_val);
  if (report) {
    report->validation_accuracy = clf.validation_accuracy;
    report->best_epoch = best_epoch;
    report->train_size = x_train.size();
    report->validation_size = x_val.size();
  }
  return clf;
}

void save_classifier(const std::filesystem::path& path, const CnnClassifier& clf,
                     const Vocabulary& vocab) {
  Container c;
  c.meta["kind"] = "catvrnn-classifier";
  c.meta["dtype"] = dtype_name<float>();
  c.meta["config"] = clf.config;
  c.meta["vocab_digest"] = vocab.digest();
  c.meta["validation_accuracy"] = clf.validation_accuracy;
  c.meta["epochs_trained"] = clf.epochs_trained;
  append_store(c.tensors, clf.store);
  write_container(path, c);
}

CnnClassifier load_classifier(const std::filesystem::path& path, const Vocabulary& vocab) {
  const Container c = read_container(path);
  if (c.meta.value("kind", std::string()) != "catvrnn-classifier") {
    throw FormatError(path.string() + " is not a classifier checkpoint");
  }
  if (c.meta.at("vocab_digest").get<std::string>() != vocab.digest()) {
    throw FormatError(path.string() + ": classifier vocabulary does not match the corpus");
  }
  Rng scratch(0);
  CnnClassifier clf = make_classifier(c.meta.at("config").get<ClassifierConfig>(), scratch);
  load_store(clf.store, c.tensors);
  clf.validation_accuracy = c.meta.value("validation_accuracy", 0.0);
  clf.epochs_trained = c.meta.value("epochs_trained", 0);
  return clf;
}

}  // namespace catvrnn
