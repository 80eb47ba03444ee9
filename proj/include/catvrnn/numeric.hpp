#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "catvrnn/errors.hpp"
#include "catvrnn/tensor.hpp"

namespace catvrnn {

/// Overflow-safe log(sum(exp(x))) over all coefficients of `x`.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Scalar m = x.maxCoeff();
  if (!std::isfinite(static_cast<double>(m))) return m;
  return m + std::log((x.array() - m).exp().sum());
}

/// Softmax of a row vector; subtracts the maximum before exponentiating.
template <typename Derived>
RowVector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  RowVector<Scalar> e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

template <typename Derived>
RowVector<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& logits) {
  return (logits.array() - log_sum_exp(logits)).matrix();
}

/// -log softmax(logits)[target].
template <typename Derived>
typename Derived::Scalar cross_entropy_from_logits(const Eigen::MatrixBase<Derived>& logits,
                                                   Index target) {
  if (target < 0 || target >= logits.size()) {
    throw InvariantError("cross_entropy_from_logits: target " + std::to_string(target) +
                         " out of range for " + std::to_string(logits.size()) + " classes");
  }
  return log_sum_exp(logits) - logits(target);
}

/// Diagonal Gaussian N(mu, diag(sigma^2)); sigma must be strictly positive.
template <typename Scalar>
struct GaussianParams {
  RowVector<Scalar> mu;
  RowVector<Scalar> sigma;

  void validate() const {
    if (mu.size() != sigma.size()) throw ConfigError("GaussianParams: mu/sigma length mismatch");
    if (!(sigma.array() > Scalar(0)).all()) {
      throw InvariantError("GaussianParams: sigma must be strictly positive");
    }
  }
};

/// KL(q || p) for diagonal Gaussians, closed form.
template <typename Scalar>
Scalar kl_gaussians(const GaussianParams<Scalar>& q, const GaussianParams<Scalar>& p) {
  q.validate();
  p.validate();
  if (q.mu.size() != p.mu.size()) throw ConfigError("kl_gaussians: dimension mismatch");
  const auto vq = q.sigma.array().square();
  const auto vp = p.sigma.array().square();
  const auto diff2 = (q.mu - p.mu).array().square();
  return ((p.sigma.array() / q.sigma.array()).log() + (vq + diff2) / (Scalar(2) * vp) -
          Scalar(0.5))
      .sum();
}

/// Draws z = mu + sigma * eps with eps ~ N(0, I) from the "latent" stream.
template <typename Scalar>
RowVector<Scalar> reparameterize(const GaussianParams<Scalar>& g, Rng& rng) {
  g.validate();
  const Matrix<Scalar> eps = rng.normal<Scalar>("latent", 1, g.mu.size());
  return g.mu + (g.sigma.array() * eps.row(0).array()).matrix();
}

inline double relative_error(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& x) {
  return x.allFinite();
}

}  // namespace catvrnn
