#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "catvrnn/tape.hpp"
#include "catvrnn/tensor.hpp"

namespace catvrnn {

enum class Activation { kNone, kRelu, kSoftplus };

/// Indices of a fully connected layer's tensors inside a ParamStore.
struct DenseLayer {
  std::size_t weight = 0;
  std::size_t bias = 0;
};

/// Single-layer GRU with gate order (reset, update, new), PyTorch layout.
struct GruLayer {
  std::size_t weight_ih = 0;
  std::size_t weight_hh = 0;
  std::size_t bias_ih = 0;
  std::size_t bias_hh = 0;
  Index hidden = 0;
};

/// Registers `prefix.weight` (out x in) and `prefix.bias` drawn from
/// U(-1/sqrt(in), 1/sqrt(in)) on the "params" stream.
template <typename Scalar>
DenseLayer add_dense(ParamStore<Scalar>& store, const std::string& prefix, Index in, Index out,
                     Rng& rng) {
  DenseLayer l;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  l.weight = store.add(prefix + ".weight", {out, in});
  store[l.weight].value = rng.uniform<Scalar>("params", out, in, -bound, bound);
  l.bias = store.add(prefix + ".bias", {out});
  store[l.bias].value = rng.uniform<Scalar>("params", 1, out, -bound, bound);
  return l;
}

template <typename Scalar>
GruLayer add_gru(ParamStore<Scalar>& store, const std::string& prefix, Index in, Index hidden,
                 Rng& rng) {
  GruLayer g;
  g.hidden = hidden;
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  g.weight_ih = store.add(prefix + ".weight_ih", {3 * hidden, in});
  store[g.weight_ih].value = rng.uniform<Scalar>("params", 3 * hidden, in, -bound, bound);
  g.weight_hh = store.add(prefix + ".weight_hh", {3 * hidden, hidden});
  store[g.weight_hh].value = rng.uniform<Scalar>("params", 3 * hidden, hidden, -bound, bound);
  g.bias_ih = store.add(prefix + ".bias_ih", {3 * hidden});
  store[g.bias_ih].value = rng.uniform<Scalar>("params", 1, 3 * hidden, -bound, bound);
  g.bias_hh = store.add(prefix + ".bias_hh", {3 * hidden});
  store[g.bias_hh].value = rng.uniform<Scalar>("params", 1, 3 * hidden, -bound, bound);
  return g;
}

template <typename Scalar>
Var<Scalar> dense(const Var<Scalar>& x, ParamStore<Scalar>& store, const DenseLayer& l) {
  return linear(x, store[l.weight], store[l.bias]);
}

template <typename Scalar>
Var<Scalar> activate(const Var<Scalar>& x, Activation act) {
  switch (act) {
    case Activation::kRelu:
      return relu(x);
    case Activation::kSoftplus:
      return softplus(x);
    case Activation::kNone:
      break;
  }
  return x;
}

/// Applies each dense layer followed by its activation.
template <typename Scalar>
Var<Scalar> mlp_forward(const Var<Scalar>& input, ParamStore<Scalar>& store,
                        std::span<const DenseLayer> stack, std::span<const Activation> acts) {
  if (stack.size() != acts.size()) {
    throw ConfigError("mlp_forward: " + std::to_string(stack.size()) + " layers but " +
                      std::to_string(acts.size()) + " activation tags");
  }
  Var<Scalar> x = input;
  for (std::size_t i = 0; i < stack.size(); ++i) x = activate(dense(x, store, stack[i]), acts[i]);
  return x;
}

/// Gradient-blocking copy.
template <typename Scalar>
Var<Scalar> detach(const Var<Scalar>& x) {
  return x.tape()->constant(x.value());
}

/// h' = (1 - u) * n + u * h with
///   r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
///   u = sigmoid(W_iu x + b_iu + W_hu h + b_hu)
///   n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
template <typename Scalar>
Var<Scalar> gru_cell(const Var<Scalar>& x, const Var<Scalar>& h, ParamStore<Scalar>& store,
                     const GruLayer& g) {
  const Index H = g.hidden;
  if (h.cols() != H) {
    throw ConfigError("gru_cell: hidden width " + std::to_string(h.cols()) + " != " +
                      std::to_string(H));
  }
  const auto gi = linear(x, store[g.weight_ih], store[g.bias_ih]);
  const auto gh = linear(h, store[g.weight_hh], store[g.bias_hh]);
  const auto r = sigmoid(slice_cols(gi, 0, H) + slice_cols(gh, 0, H));
  const auto u = sigmoid(slice_cols(gi, H, H) + slice_cols(gh, H, H));
  const auto n = tanh(slice_cols(gi, 2 * H, H) + r * slice_cols(gh, 2 * H, H));
  return (Scalar(1) - u) * n + u * h;
}

/// z = mu + sigma * eps, eps ~ N(0, I) drawn from the "latent" stream.
/// Gradients reach mu and sigma; eps is a constant.
template <typename Scalar>
Var<Scalar> reparameterize(const Var<Scalar>& mu, const Var<Scalar>& sigma, Rng& rng) {
  if (!(sigma.value().array() > Scalar(0)).all()) {
    throw InvariantError("reparameterize: sigma must be strictly positive");
  }
  const auto eps = mu.tape()->constant(rng.normal<Scalar>("latent", mu.rows(), mu.cols()));
  return mu + sigma * eps;
}

}  // namespace catvrnn
