#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "catvrnn/grad_check.hpp"
#include "catvrnn/model.hpp"

namespace catvrnn {

struct GradSuiteEntry {
  std::string name;
  GradCheckReport report;
};

/// Tiny model: |V| = 12, embed 8, hidden 6, latent 4, T = 5.
ModelConfig grad_suite_config(InitMode init, bool kl, bool features = false);

/// Finite-difference checks of every tape primitive (double) followed by the
/// full joint loss under static/adaptive initialization with the KL term on
/// and off, plus one feature-extractor run. The full-model checks run in
/// long double: at step 1e-5 double roundoff in a loss of magnitude ~10 is
/// ~1e-10, which swamps gradients near 1e-7.
std::vector<GradSuiteEntry> run_gradient_suite(const GradCheckOptions& opts, std::uint64_t seed = 7);

/// Full-model check for one configuration on a fixed 3-sentence batch.
template <typename Scalar>
GradCheckReport check_model_gradient(const ModelConfig& cfg, const GradCheckOptions& opts,
                                     std::uint64_t seed);

extern template GradCheckReport check_model_gradient<double>(const ModelConfig&,
                                                             const GradCheckOptions&, std::uint64_t);
extern template GradCheckReport check_model_gradient<long double>(const ModelConfig&,
                                                                  const GradCheckOptions&,
                                                                  std::uint64_t);

}  // namespace catvrnn
