#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "catvrnn/data.hpp"
#include "catvrnn/model.hpp"
#include "catvrnn/tensor.hpp"

namespace catvrnn {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers, indexed like the ParamStore they belong to.
template <typename Scalar>
struct AdamState {
  AdamOptions options;
  std::int64_t step = 0;
  std::vector<Matrix<Scalar>> m;
  std::vector<Matrix<Scalar>> v;
};

/// Bias-corrected Adam update of every trainable tensor, in place.
template <typename Scalar>
void adam_step(ParamStore<Scalar>& params, AdamState<Scalar>& state) {
  for (const auto& t : params) {
    if (t.trainable && !t.has_grad()) {
      throw ConfigError("adam_step: tensor '" + t.name + "' has no gradient");
    }
  }
  if (state.m.size() != params.size()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
  }
  ++state.step;
  const auto& o = state.options;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  const Scalar b1 = static_cast<Scalar>(o.beta1), b2 = static_cast<Scalar>(o.beta2);
  const Scalar step_size = static_cast<Scalar>(o.lr / c1);
  const Scalar inv_c2 = static_cast<Scalar>(1.0 / c2);
  const Scalar eps = static_cast<Scalar>(o.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& t = params[i];
    if (!t.trainable) continue;
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != t.value.size()) {
      m = Matrix<Scalar>::Zero(t.value.rows(), t.value.cols());
      v = Matrix<Scalar>::Zero(t.value.rows(), t.value.cols());
    }
    m = b1 * m + (Scalar(1) - b1) * t.grad;
    v = b2 * v + (Scalar(1) - b2) * t.grad.cwiseAbs2();
    t.value.array() -= step_size * m.array() / ((v.array() * inv_c2).sqrt() + eps);
  }
}

struct TrainPlan {
  int epochs = 250;
  int batch_size = 64;
  AdamOptions adam;
  std::optional<double> max_grad_norm;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(adam.lr > 0.0)) throw ConfigError("learning rate must be positive");
  }
};

void to_json(nlohmann::json& j, const TrainPlan& p);
void from_json(const nlohmann::json& j, TrainPlan& p);

struct EpochStats {
  int epoch = 0;
  double mean_gen_nll = 0.0;
  double mean_cls_nll = 0.0;
  double mean_kl = 0.0;
  double mean_total = 0.0;
  double min_kl = 0.0;
  std::size_t sentences = 0;
};

void to_json(nlohmann::json& j, const EpochStats& s);

/// Everything that evolves during training.
template <typename Scalar>
struct TrainingState {
  ModelConfig config;
  CatVrnnParams<Scalar> params;
  AdamState<Scalar> adam;
  Rng rng;
  int epoch = 0;  // completed epochs
};

template <typename Scalar>
TrainingState<Scalar> init_training(const ModelConfig& cfg, const TrainPlan& plan,
                                    std::uint64_t seed) {
  plan.validate();
  TrainingState<Scalar> st{cfg, {}, {}, Rng(seed), 0};
  st.params = make_params<Scalar>(cfg, st.rng);
  st.adam.options = plan.adam;
  return st;
}

template <typename Scalar>
double clip_grad_norm(ParamStore<Scalar>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& t : params) {
    if (t.has_grad()) sq += static_cast<double>(t.grad.squaredNorm());
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const Scalar scale = static_cast<Scalar>(max_norm / norm);
    for (auto& t : params) {
      if (t.has_grad()) t.grad *= scale;
    }
  }
  return norm;
}

/// One shuffled pass over `data`; the batch loss is the mean over sentences.
template <typename Scalar>
EpochStats train_epoch(const Batch& data, TrainingState<Scalar>& st, const TrainPlan& plan) {
  if (data.size() == 0) throw DataError("train_epoch: empty corpus");
  plan.validate();
  st.adam.options = plan.adam;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), st.rng.stream("shuffle"));

  EpochStats stats;
  stats.epoch = st.epoch + 1;
  stats.min_kl = std::numeric_limits<double>::infinity();
  const std::size_t bs = static_cast<std::size_t>(plan.batch_size);
  for (std::size_t begin = 0; begin < order.size(); begin += bs) {
    const std::size_t end = std::min(order.size(), begin + bs);
    const Batch batch = data.select(order, begin, end);
    st.params.store.zero_grad();
    Tape<Scalar> tape;
    const auto fwd = forward_teacher(tape, batch.inputs, batch.categories, st.params, st.config,
                                     Phase::kTrain, st.rng);
    const auto loss = joint_loss(fwd, batch.targets, batch.categories, st.config);
    if (!std::isfinite(static_cast<double>(loss.total.scalar()))) {
      throw NumericError("non-finite training loss at epoch " + std::to_string(stats.epoch));
    }
    tape.backward(loss.total);
    if (plan.max_grad_norm) clip_grad_norm(st.params.store, *plan.max_grad_norm);
    adam_step(st.params.store, st.adam);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      stats.mean_gen_nll += loss.gen_nll[b];
      stats.mean_cls_nll += loss.cls_nll[b];
      stats.mean_kl += loss.kl[b];
      stats.min_kl = std::min(stats.min_kl, loss.kl[b]);
    }
  }
  const double n = static_cast<double>(data.size());
  stats.sentences = data.size();
  stats.mean_gen_nll /= n;
  stats.mean_cls_nll /= n;
  stats.mean_kl /= n;
  stats.mean_total = stats.mean_gen_nll + stats.mean_cls_nll +
                     (st.config.use_kl_term ? stats.mean_kl : 0.0);
  ++st.epoch;
  return stats;
}

}  // namespace catvrnn
