#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>

#include "catvrnn/checkpoint.hpp"
#include "catvrnn/data.hpp"
#include "catvrnn/layers.hpp"
#include "catvrnn/training.hpp"

namespace catvrnn {

/// Convolutional sentence classifier used to score category accuracy:
/// embedding, one convolution per window width, ReLU, max over time,
/// dropout, linear head.
struct ClassifierConfig {
  int vocab_size = 0;
  int num_categories = 2;
  int embed_dim = 128;
  std::vector<int> widths{3, 4, 5};
  int feature_maps = 100;
  double dropout = 0.5;
  int max_len = 30;  // inputs are truncated or PAD-filled to this length
  int max_epochs = 20;
  int patience = 3;
  int batch_size = 50;
  double lr = 1e-3;
  double validation_fraction = 0.1;

  void validate() const;
};

void to_json(nlohmann::json& j, const ClassifierConfig& c);
void from_json(const nlohmann::json& j, ClassifierConfig& c);

struct CnnClassifier {
  ClassifierConfig config;
  ParamStore<float> store;
  std::size_t embedding = 0;
  std::vector<DenseLayer> convs;
  DenseLayer head;
  double validation_accuracy = 0.0;
  int epochs_trained = 0;
};

struct ClassifierTrainReport {
  double validation_accuracy = 0.0;
  int best_epoch = 0;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
};

CnnClassifier make_classifier(const ClassifierConfig& cfg, Rng& rng);

/// Log-probabilities (B x K) for encoded sentences. `dropout_rng` non-null
/// enables training-mode dropout.
Var<float> classifier_forward(Tape<float>& tape, CnnClassifier& clf,
                              const std::vector<std::vector<int>>& sentences, Rng* dropout_rng);

/// Trains on a shuffled split of `corpus` and keeps the weights with the best
/// validation accuracy. Deterministic for a fixed seed.
CnnClassifier train_eval_classifier(const LabeledCorpus& corpus, const Vocabulary& vocab,
                                    ClassifierConfig cfg, std::uint64_t seed,
                                    ClassifierTrainReport* report = nullptr);

/// Argmax class per sentence (token ids under the classifier's vocabulary).
std::vector<int> classifier_predict(CnnClassifier& clf, const std::vector<std::vector<int>>& sentences);

void save_classifier(const std::filesystem::path& path, const CnnClassifier& clf,
                     const Vocabulary& vocab);
CnnClassifier load_classifier(const std::filesystem::path& path, const Vocabulary& vocab);

}  // namespace catvrnn
