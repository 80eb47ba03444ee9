#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "catvrnn/data.hpp"
#include "catvrnn/layers.hpp"
#include "catvrnn/numeric.hpp"
#include "catvrnn/tape.hpp"
#include "catvrnn/tensor.hpp"

namespace catvrnn {

/// How h0 is derived from the category.
///   kZero:     h0 = 0
///   kStatic:   h0 = omega * (-1)^c * softmax(r),  r ~ U[0,1)^H
///   kAdaptive: h0 = c * w + b (+ r ~ U[0,1)^H while training)
enum class InitMode { kZero, kStatic, kAdaptive };

std::string to_string(InitMode m);
InitMode parse_init_mode(const std::string& s);

enum class Phase { kTrain, kEval };

struct ModelConfig {
  int vocab_size = 0;
  int embed_dim = 300;
  int hidden_dim = 256;
  int latent_dim = 128;
  int num_categories = 2;
  int max_len = 30;

  InitMode init_mode = InitMode::kStatic;
  /// Initialization used at evaluation time. Unset means "same as training",
  /// except that zero-init training evaluates with the static function.
  std::optional<InitMode> eval_init_mode;
  double static_omega = 8.5;

  bool use_kl_term = false;
  bool use_feature_extractors = false;
  /// When false the classifier head sees a detached final state, so the
  /// classification loss only trains the head (the VRNN-* variants).
  bool use_classifier = true;
  /// Drop generation-loss terms past the terminating PAD.
  bool mask_padding = false;
  double temperature = 1.0;

  int encoder_hidden = 512;
  int encoder_out = 256;
  int decoder_hidden = 256;
  int decoder_out = 300;
  int prior_hidden = 256;

  void validate() const;
  InitMode init_for(Phase phase) const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// All learnable tensors of the network plus the layer index map into the store.
template <typename Scalar>
struct CatVrnnParams {
  ParamStore<Scalar> store;
  std::size_t embedding = 0;
  DenseLayer enc1, enc2, mu_head, sigma_head;
  DenseLayer dec1, dec2, output;
  GruLayer gru;
  DenseLayer classifier;
  std::optional<std::size_t> init_omega, init_bias;
  std::optional<DenseLayer> prior1, prior_mu, prior_sigma;
  std::optional<DenseLayer> feat_x, feat_z;
};

template <typename Scalar>
CatVrnnParams<Scalar> make_params(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  CatVrnnParams<Scalar> p;
  auto& s = p.store;
  const Index V = cfg.vocab_size, E = cfg.embed_dim, H = cfg.hidden_dim, Z = cfg.latent_dim;
  p.embedding = s.add("embedding", {V, E});
  s[p.embedding].value = rng.normal<Scalar>("params", V, E);
  p.enc1 = add_dense(s, "encoder.fc1", E + H, cfg.encoder_hidden, rng);
  p.enc2 = add_dense(s, "encoder.fc2", cfg.encoder_hidden, cfg.encoder_out, rng);
  p.mu_head = add_dense(s, "mu_head", cfg.encoder_out, Z, rng);
  p.sigma_head = add_dense(s, "sigma_head", cfg.encoder_out, Z, rng);
  p.dec1 = add_dense(s, "decoder.fc1", Z + H, cfg.decoder_hidden, rng);
  p.dec2 = add_dense(s, "decoder.fc2", cfg.decoder_hidden, cfg.decoder_out, rng);
  p.output = add_dense(s, "output", cfg.decoder_out, V, rng);
  p.gru = add_gru(s, "gru", E + Z, H, rng);
  p.classifier = add_dense(s, "classifier", H, cfg.num_categories, rng);
  if (cfg.init_mode == InitMode::kAdaptive || cfg.eval_init_mode == InitMode::kAdaptive) {
    p.init_omega = s.add("init.omega", {H});
    s[*p.init_omega].value = rng.uniform<Scalar>("params", 1, H, -1.0, 1.0);
    p.init_bias = s.add("init.bias", {H});
    s[*p.init_bias].value = rng.uniform<Scalar>("params", 1, H, -1.0, 1.0);
  }
  if (cfg.use_kl_term) {
    p.prior1 = add_dense(s, "prior.fc1", H, cfg.prior_hidden, rng);
    p.prior_mu = add_dense(s, "prior.mu", cfg.prior_hidden, Z, rng);
    p.prior_sigma = add_dense(s, "prior.sigma", cfg.prior_hidden, Z, rng);
  }
  if (cfg.use_feature_extractors) {
    p.feat_x = add_dense(s, "feat_x", E, E, rng);
    p.feat_z = add_dense(s, "feat_z", Z, Z, rng);
  }
  return p;
}

/// Exact number of learnable scalars.
template <typename Scalar>
std::size_t parameter_count(const CatVrnnParams<Scalar>& p) {
  return p.store.parameter_count();
}

// ---------------------------------------------------------------------------
// Hidden-state initialization (single sentence)

/// omega * (-1)^c * softmax(r) for a given r.
template <typename Scalar>
RowVector<Scalar> static_hidden_from(int c, double omega, const RowVector<Scalar>& r) {
  if (c < 0 || c > 1) {
    throw InvariantError("static initialization supports only categories 0 and 1, got " +
                         std::to_string(c));
  }
  const Scalar sign = c == 0 ? Scalar(1) : Scalar(-1);
  return softmax(r) * (static_cast<Scalar>(omega) * sign);
}

/// Static initialization; r ~ U[0,1)^H is drawn from the "init" stream.
template <typename Scalar>
RowVector<Scalar> init_hidden_static(int c, const ModelConfig& cfg, Rng& rng) {
  if (c < 0 || c > 1) {
    throw InvariantError("static initialization supports only categories 0 and 1, got " +
                         std::to_string(c));
  }
  const Matrix<Scalar> r = rng.uniform<Scalar>("init", 1, cfg.hidden_dim);
  return static_hidden_from<Scalar>(c, cfg.static_omega, r.row(0));
}

/// c * omega + b, plus r ~ U[0,1)^H from the "noise" stream when training.
template <typename Scalar>
RowVector<Scalar> init_hidden_adaptive(int c, const RowVector<Scalar>& omega,
                                       const RowVector<Scalar>& bias, bool train_mode, Rng& rng) {
  RowVector<Scalar> h = omega * static_cast<Scalar>(c) + bias;
  if (train_mode) h += rng.uniform<Scalar>("noise", 1, h.size()).row(0);
  return h;
}

template <typename Scalar>
RowVector<Scalar> init_hidden_zero(const ModelConfig& cfg) {
  return RowVector<Scalar>::Zero(cfg.hidden_dim);
}

/// Batched h0 on the tape, one row per category entry.
template <typename Scalar>
Var<Scalar> initial_hidden(Tape<Scalar>& tape, CatVrnnParams<Scalar>& p, const ModelConfig& cfg,
                           const std::vector<int>& categories, Phase phase, Rng& rng) {
  const Index B = static_cast<Index>(categories.size());
  const Index H = cfg.hidden_dim;
  for (int c : categories) {
    if (c < 0 || c >= cfg.num_categories) {
      throw InvariantError("category " + std::to_string(c) + " outside [0, " +
                           std::to_string(cfg.num_categories) + ")");
    }
  }
  switch (cfg.init_for(phase)) {
    case InitMode::kZero:
      return tape.constant(Matrix<Scalar>::Zero(B, H));
    case InitMode::kStatic: {
      Matrix<Scalar> h0(B, H);
      for (Index b = 0; b < B; ++b) h0.row(b) = init_hidden_static<Scalar>(categories[b], cfg, rng);
      return tape.constant(std::move(h0));
    }
    case InitMode::kAdaptive: {
      if (!p.init_omega || !p.init_bias) {
        throw ConfigError("adaptive initialization requested but init.omega/init.bias are absent");
      }
      std::vector<Scalar> coeff(categories.begin(), categories.end());
      auto h0 = scale_rows(broadcast_rows(param(tape, p.store[*p.init_omega]), B), coeff) +
                broadcast_rows(param(tape, p.store[*p.init_bias]), B);
      if (phase == Phase::kTrain) h0 = h0 + tape.constant(rng.uniform<Scalar>("noise", B, H));
      return h0;
    }
  }
  throw ConfigError("unknown init mode");
}

// ---------------------------------------------------------------------------
// Recurrent step and unrolled forward

template <typename Scalar>
struct StepOutput {
  Var<Scalar> h_next;
  Var<Scalar> logits;
  Var<Scalar> mu;
  Var<Scalar> sigma;
  Var<Scalar> z;
  std::optional<Var<Scalar>> kl;  // (B x 1), present iff use_kl_term
};

/// softplus(x) + 1e-6 keeps the scale strictly positive.
template <typename Scalar>
Var<Scalar> positive_scale(const Var<Scalar>& x) {
  return softplus(x) + Scalar(1e-6);
}

/// One recurrent step:
///   e = E[x];  (mu, sigma) = heads(encoder(e ⊕ h));  z = mu + sigma * eps
///   logits = output(decoder(z ⊕ h));  h' = GRU(e ⊕ z, h)
template <typename Scalar>
StepOutput<Scalar> cell_step(Tape<Scalar>& tape, const Var<Scalar>& h_prev,
                             const std::vector<int>& x_ids, CatVrnnParams<Scalar>& p,
                             const ModelConfig& cfg, Rng& rng) {
  auto& s = p.store;
  if (static_cast<Index>(x_ids.size()) != h_prev.rows()) {
    throw ConfigError("cell_step: token count does not match hidden batch");
  }
  const auto e = embedding(tape, s[p.embedding], x_ids);

  const auto enc = relu(dense(relu(dense(concat_cols(e, h_prev), s, p.enc1)), s, p.enc2));
  StepOutput<Scalar> out;
  out.mu = dense(enc, s, p.mu_head);
  out.sigma = positive_scale(dense(enc, s, p.sigma_head));
  out.z = reparameterize(out.mu, out.sigma, rng);

  const auto dec = relu(dense(relu(dense(concat_cols(out.z, h_prev), s, p.dec1)), s, p.dec2));
  out.logits = dense(dec, s, p.output);

  auto x_in = e;
  auto z_in = out.z;
  if (cfg.use_feature_extractors) {
    x_in = relu(dense(e, s, *p.feat_x));
    z_in = relu(dense(out.z, s, *p.feat_z));
  }
  out.h_next = gru_cell(concat_cols(x_in, z_in), h_prev, s, p.gru);

  if (cfg.use_kl_term) {
    const auto ph = relu(dense(h_prev, s, *p.prior1));
    const auto prior_mu = dense(ph, s, *p.prior_mu);
    const auto prior_sigma = positive_scale(dense(ph, s, *p.prior_sigma));
    out.kl = kl_diag_gaussian(out.mu, out.sigma, prior_mu, prior_sigma);
  }
  return out;
}

template <typename Scalar>
struct SequenceForward {
  std::vector<Var<Scalar>> step_logits;  // T entries of (B x |V|)
  Var<Scalar> class_log_probs;           // (B x K)
  std::optional<Var<Scalar>> kl_sum;     // (B x 1)
  Var<Scalar> final_hidden;              // (B x H)
};

/// Teacher-forced unroll over padded inputs (row b = [PAD, w_1, ..., PAD...]).
template <typename Scalar>
SequenceForward<Scalar> forward_teacher(Tape<Scalar>& tape,
                                        const std::vector<std::vector<int>>& inputs,
                                        const std::vector<int>& categories,
                                        CatVrnnParams<Scalar>& p, const ModelConfig& cfg,
                                        Phase phase, Rng& rng) {
  const std::size_t B = inputs.size();
  if (B == 0 || categories.size() != B) throw ConfigError("forward_teacher: bad batch");
  const std::size_t T = static_cast<std::size_t>(cfg.max_len);
  for (const auto& row : inputs) {
    if (row.size() != T) {
      throw InvariantError("forward_teacher: input length " + std::to_string(row.size()) +
                           " != T = " + std::to_string(T));
    }
    if (row[0] != kPadId) throw InvariantError("forward_teacher: input must start with PAD");
  }

  SequenceForward<Scalar> fwd;
  auto h = initial_hidden(tape, p, cfg, categories, phase, rng);
  std::vector<int> column(B);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t b = 0; b < B; ++b) column[b] = inputs[b][t];
    auto step = cell_step(tape, h, column, p, cfg, rng);
    fwd.step_logits.push_back(step.logits);
    if (step.kl) fwd.kl_sum = fwd.kl_sum ? *fwd.kl_sum + *step.kl : *step.kl;
    h = step.h_next;
  }
  fwd.final_hidden = h;
  const auto cls_in = cfg.use_classifier ? h : detach(h);
  fwd.class_log_probs = log_softmax_rows(dense(cls_in, p.store, p.classifier));
  return fwd;
}

template <typename Scalar>
struct LossBreakdown {
  Var<Scalar> total;            // scalar: batch mean of per-sentence totals
  std::vector<double> gen_nll;  // per sentence
  std::vector<double> cls_nll;
  std::vector<double> kl;       // zeros when the KL term is off
  std::vector<double> scored_tokens;
};

/// Target positions that count towards the generation loss: everything, or
/// with `mask_padding` the real tokens plus the terminating PAD.
inline std::vector<std::vector<double>> target_weights(const std::vector<std::vector<int>>& targets,
                                                       bool mask_padding) {
  std::vector<std::vector<double>> w;
  for (const auto& row : targets) {
    std::vector<double> r(row.size(), 1.0);
    if (mask_padding) {
      bool seen_pad = false;
      for (std::size_t t = 0; t < row.size(); ++t) {
        if (seen_pad) r[t] = 0.0;
        if (row[t] == kPadId) seen_pad = true;
      }
    }
    w.push_back(std::move(r));
  }
  return w;
}

/// Per sentence: sum_t CE(logits_t, target_t) - log p(c) (+ KL); total is the batch mean.
template <typename Scalar>
LossBreakdown<Scalar> joint_loss(const SequenceForward<Scalar>& fwd,
                                 const std::vector<std::vector<int>>& targets,
                                 const std::vector<int>& categories, const ModelConfig& cfg) {
  const std::size_t B = targets.size();
  const std::size_t T = fwd.step_logits.size();
  if (B == 0 || categories.size() != B) throw ConfigError("joint_loss: bad batch");
  for (const auto& row : targets) {
    if (row.size() != T) {
      throw ConfigError("joint_loss: target length " + std::to_string(row.size()) +
                        " != T = " + std::to_string(T));
    }
  }
  const auto weights = target_weights(targets, cfg.mask_padding);

  LossBreakdown<Scalar> out;
  out.scored_tokens.assign(B, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    for (double w : weights[b]) out.scored_tokens[b] += w;
  }

  std::optional<Var<Scalar>> gen;
  std::vector<int> column(B);
  std::vector<Scalar> wcol(B);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t b = 0; b < B; ++b) {
      column[b] = targets[b][t];
      wcol[b] = static_cast<Scalar>(weights[b][t]);
    }
    auto ce = cfg.mask_padding ? cross_entropy_rows(fwd.step_logits[t], column, wcol)
                               : cross_entropy_rows(fwd.step_logits[t], column);
    gen = gen ? *gen + ce : ce;
  }
  const auto cls = Scalar(0) - pick(fwd.class_log_probs, categories);
  auto per_row = *gen + cls;
  if (cfg.use_kl_term && fwd.kl_sum) per_row = per_row + *fwd.kl_sum;
  out.total = sum(per_row) * (Scalar(1) / static_cast<Scalar>(B));

  for (std::size_t b = 0; b < B; ++b) {
    const Index r = static_cast<Index>(b);
    out.gen_nll.push_back(static_cast<double>(gen->value()(r, 0)));
    out.cls_nll.push_back(static_cast<double>(cls.value()(r, 0)));
    out.kl.push_back(fwd.kl_sum ? static_cast<double>(fwd.kl_sum->value()(r, 0)) : 0.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampling

/// Index drawn from softmax(logits / temperature) using one U[0,1) draw.
template <typename Scalar>
int sample_categorical(const RowVector<Scalar>& logits, double temperature, std::mt19937_64& engine) {
  const RowVector<double> probs = softmax(logits.template cast<double>() / temperature);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(engine);
  double acc = 0.0;
  for (Index i = 0; i < probs.size(); ++i) {
    acc += probs(i);
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size() - 1);
}

/// Free-running sampling of `count` sentences for category `c`. Each sentence
/// starts from PAD and stops at the first PAD emission or after T tokens.
template <typename Scalar>
std::vector<std::vector<int>> generate(int c, std::size_t count, CatVrnnParams<Scalar>& p,
                                       const ModelConfig& cfg, Rng& rng,
                                       std::size_t batch_size = 64) {
  if (c < 0 || c >= cfg.num_categories) {
    throw ConfigError("category " + std::to_string(c) + " out of range for K = " +
                      std::to_string(cfg.num_categories));
  }
  std::vector<std::vector<int>> result;
  result.reserve(count);
  auto& engine = rng.stream("sampling");
  while (result.size() < count) {
    const std::size_t B = std::min(batch_size, count - result.size());
    Tape<Scalar> tape(false);
    auto h = initial_hidden(tape, p, cfg, std::vector<int>(B, c), Phase::kEval, rng);
    std::vector<int> x(B, kPadId);
    std::vector<std::vector<int>> seqs(B);
    std::vector<bool> alive(B, true);
    for (int t = 0; t < cfg.max_len; ++t) {
      auto step = cell_step(tape, h, x, p, cfg, rng);
      for (std::size_t b = 0; b < B; ++b) {
        const int y = sample_categorical<Scalar>(step.logits.value().row(static_cast<Index>(b)),
                                                 cfg.temperature, engine);
        if (alive[b]) {
          if (y == kPadId) {
            alive[b] = false;
          } else {
            seqs[b].push_back(y);
          }
        }
        x[b] = y;
      }
      h = step.h_next;
    }
    for (auto& s : seqs) result.push_back(std::move(s));
  }
  return result;
}

}  // namespace catvrnn
