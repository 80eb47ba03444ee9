#include "catvrnn/grad_suite.hpp"

#include <functional>

#include "catvrnn/layers.hpp"

namespace catvrnn {

namespace {

using Build = std::function<Var<double>(Tape<double>&)>;

/// sum(y .* R) with a fixed random R, so every output element matters.
Var<double> project(const Var<double>& y, std::uint64_t seed) {
  Rng r(seed);
  return sum(y * y.tape()->constant(r.normal<double>("proj", y.rows(), y.cols())));
}

struct Probe {
  ParamStore<double> store;
  Rng rng;

  explicit Probe(std::uint64_t seed) : rng(seed) {}

  std::size_t add(const std::string& name, Index rows, Index cols, double offset = 0.0) {
    const auto i = store.add(name, {rows, cols});
    store[i].value = rng.normal<double>("params", rows, cols);
    // Keep values away from the kinks of relu and max.
    if (offset != 0.0) {
      store[i].value = store[i].value.unaryExpr([offset](double v) { return v >= 0 ? v + offset : v - offset; });
    }
    return i;
  }
  Var<double> p(Tape<double>& t, std::size_t i) { return param(t, store[i]); }
};

GradSuiteEntry run_probe(const std::string& name, Probe& probe, const Build& build,
                         const GradCheckOptions& opts) {
  return {name, check_gradient<double>(build, probe.store, opts)};
}

std::vector<GradSuiteEntry> primitive_checks(const GradCheckOptions& opts, std::uint64_t seed) {
  std::vector<GradSuiteEntry> out;
  {
    Probe pr(seed + 1);
    const auto a = pr.add("a", 3, 4), b = pr.add("b", 3, 4);
    out.push_back(run_probe("add_sub_mul", pr, [&](Tape<double>& t) {
      const auto x = pr.p(t, a), y = pr.p(t, b);
      return project((x + y) * (x - y) + (x * 0.5) + 1.5, seed);
    }, opts));
  }
  {
    Probe pr(seed + 2);
    const auto x = pr.add("x", 3, 5), w = pr.add("w", 4, 5), b = pr.add("b", 1, 4);
    out.push_back(run_probe("linear", pr, [&](Tape<double>& t) {
      return project(linear(pr.p(t, x), pr.store[w], pr.store[b]), seed);
    }, opts));
  }
  {
    Probe pr(seed + 3);
    const auto x = pr.add("x", 3, 4, 0.05);
    out.push_back(run_probe("relu", pr, [&](Tape<double>& t) { return project(relu(pr.p(t, x)), seed); }, opts));
  }
  {
    Probe pr(seed + 4);
    const auto x = pr.add("x", 3, 4);
    out.push_back(run_probe("sigmoid", pr, [&](Tape<double>& t) { return project(sigmoid(pr.p(t, x)), seed); }, opts));
    out.push_back(run_probe("tanh", pr, [&](Tape<double>& t) { return project(tanh(pr.p(t, x)), seed); }, opts));
    out.push_back(run_probe("softplus", pr, [&](Tape<double>& t) { return project(softplus(pr.p(t, x)), seed); }, opts));
    out.push_back(run_probe("log_softmax_rows", pr, [&](Tape<double>& t) {
      return project(log_softmax_rows(pr.p(t, x)), seed);
    }, opts));
    out.push_back(run_probe("cross_entropy_rows", pr, [&](Tape<double>& t) {
      return sum(cross_entropy_rows(pr.p(t, x), {0, 3, 2}, {1.0, 0.5, 2.0}));
    }, opts));
    out.push_back(run_probe("pick", pr, [&](Tape<double>& t) {
      return project(pick(pr.p(t, x), {1, 0, 3}), seed);
    }, opts));
  }
  {
    Probe pr(seed + 5);
    const auto mq = pr.add("mq", 2, 3), sq = pr.add("sq", 2, 3), mp = pr.add("mp", 2, 3),
               sp = pr.add("sp", 2, 3);
    out.push_back(run_probe("kl_diag_gaussian", pr, [&](Tape<double>& t) {
      return project(kl_diag_gaussian(pr.p(t, mq), softplus(pr.p(t, sq)) + 0.1, pr.p(t, mp),
                                       softplus(pr.p(t, sp)) + 0.1),
                     seed);
    }, opts));
    out.push_back(run_probe("reparameterize", pr, [&](Tape<double>& t) {
      Rng noise(seed);
      return project(reparameterize(pr.p(t, mq), softplus(pr.p(t, sq)) + 0.1, noise), seed);
    }, opts));
  }
  {
    Probe pr(seed + 6);
    const auto x = pr.add("x", 3, 4), y = pr.add("y", 3, 2), r = pr.add("row", 1, 4);
    out.push_back(run_probe("concat_slice_broadcast_scale", pr, [&](Tape<double>& t) {
      const auto c = concat_cols(pr.p(t, x), pr.p(t, y));
      const auto s = slice_cols(c, 1, 4) + broadcast_rows(pr.p(t, r), 3);
      return project(scale_rows(s, std::vector<double>{1.0, -2.0, 0.5}), seed);
    }, opts));
  }
  {
    Probe pr(seed + 7);
    const auto x = pr.add("x", 2, 3), h = pr.add("h", 2, 4);
    const auto g = add_gru(pr.store, "gru", 3, 4, pr.rng);
    out.push_back(run_probe("gru_cell", pr, [&](Tape<double>& t) {
      return project(gru_cell(pr.p(t, x), pr.p(t, h), pr.store, g), seed);
    }, opts));
  }
  {
    Probe pr(seed + 8);
    const auto table = pr.add("table", 6, 3);
    const auto w = add_dense(pr.store, "conv", 2 * 3, 4, pr.rng);
    out.push_back(run_probe("embedding_unfold_group_max", pr, [&](Tape<double>& t) {
      const auto e = embedding(t, pr.store[table], {1, 2, 3, 4, 5, 0, 2, 2});
      const auto u = unfold_windows(e, 2, 4, 2);
      return project(group_max(dense(u, pr.store, w), 3), seed);
    }, opts));
  }
  return out;
}

}  // namespace

ModelConfig grad_suite_config(InitMode init, bool kl, bool features) {
  ModelConfig c;
  c.vocab_size = 12;
  c.embed_dim = 8;
  c.hidden_dim = 6;
  c.latent_dim = 4;
  c.max_len = 5;
  c.encoder_hidden = 7;
  c.encoder_out = 5;
  c.decoder_hidden = 7;
  c.decoder_out = 5;
  c.prior_hidden = 5;
  c.init_mode = init;
  c.num_categories = init == InitMode::kAdaptive ? 3 : 2;
  c.use_kl_term = kl;
  c.use_feature_extractors = features;
  c.validate();
  return c;
}

template <typename Scalar>
GradCheckReport check_model_gradient(const ModelConfig& cfg, const GradCheckOptions& opts,
                                     std::uint64_t seed) {
  Rng rng(seed);
  auto params = make_params<Scalar>(cfg, rng);
  // Three sentences of lengths 4, 2 and 1 under T = max_len.
  std::vector<LabeledSentence> sents;
  std::mt19937_64 pick_engine(seed);
  const std::vector<int> lengths{std::min(4, cfg.max_len - 1), 2, 1};
  Vocabulary vocab;
  for (int i = 2; i < cfg.vocab_size; ++i) vocab.add("w" + std::to_string(i));
  for (std::size_t s = 0; s < lengths.size(); ++s) {
    LabeledSentence ls;
    ls.category = static_cast<int>(s) % cfg.num_categories;
    for (int k = 0; k < lengths[s]; ++k) {
      ls.tokens.push_back(vocab.token(2 + static_cast<int>(pick_engine() % static_cast<unsigned>(cfg.vocab_size - 2))));
    }
    sents.push_back(ls);
  }
  const Batch batch = encode_batch(sents, vocab, cfg.max_len);
  const std::function<Var<Scalar>(Tape<Scalar>&)> build = [&](Tape<Scalar>& tape) {
    Rng noise(seed + 1000);
    const auto fwd = forward_teacher(tape, batch.inputs, batch.categories, params, cfg, Phase::kTrain, noise);
    return joint_loss(fwd, batch.targets, batch.categories, cfg).total;
  };
  return check_gradient<Scalar>(build, params.store, opts);
}

template GradCheckReport check_model_gradient<double>(const ModelConfig&, const GradCheckOptions&,
                                                      std::uint64_t);
template GradCheckReport check_model_gradient<long double>(const ModelConfig&,
                                                           const GradCheckOptions&, std::uint64_t);

std::vector<GradSuiteEntry> run_gradient_suite(const GradCheckOptions& opts, std::uint64_t seed) {
  auto out = primitive_checks(opts, seed);
  for (InitMode init : {InitMode::kStatic, InitMode::kAdaptive}) {
    for (bool kl : {false, true}) {
      const auto cfg = grad_suite_config(init, kl);
      out.push_back({"model[init=" + to_string(init) + ",kl=" + (kl ? "on" : "off") + "]",
                     check_model_gradient<long double>(cfg, opts, seed)});
    }
  }
  out.push_back({"model[init=adaptive,kl=on,features=on]",
                 check_model_gradient<long double>(grad_suite_config(InitMode::kAdaptive, true, true), opts, seed)});
  return out;
}

}  // namespace catvrnn
