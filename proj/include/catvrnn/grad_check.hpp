#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "catvrnn/numeric.hpp"
#include "catvrnn/tape.hpp"

namespace catvrnn {

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  /// Check every element when the store holds at most this many; otherwise a
  /// seeded random subsample of this size. Values below 200 are raised to 200.
  std::size_t max_elements = 0;
  std::uint64_t subsample_seed = 0;
  bool corrupt_backward = false;
};

struct GradCheckReport {
  double tolerance = 0.0;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Elements whose +/- step changed a relu or max branch; central
  /// differences are meaningless across a kink, so they are not scored.
  std::size_t skipped_kinks = 0;
  std::string worst_tensor;
  Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::map<std::string, double> per_tensor;  // worst relative error per tensor
  bool passed = false;
};

/// Compares the tape gradient of a scalar graph with central differences.
/// Fails when more than 5% of the sampled elements straddle a kink.
///
/// `build` must be deterministic: every call has to record the same
/// computation for the same parameter values (reseed any Rng inside it).
template <typename Scalar>
GradCheckReport check_gradient(const std::function<Var<Scalar>(Tape<Scalar>&)>& build,
                               ParamStore<Scalar>& params, const GradCheckOptions& opt = {}) {
  GradCheckReport report;
  report.tolerance = opt.tolerance;

  params.zero_grad();
  std::uint64_t base_branches = 0;
  {
    Tape<Scalar> tape;
    tape.set_corrupt_backward(opt.corrupt_backward);
    tape.set_track_branches(true);
    const auto out = build(tape);
    if (out.value().size() != 1) throw ConfigError("check_gradient: graph output is not a scalar");
    base_branches = tape.branch_signature();
    tape.backward(out);
  }

  struct Element {
    std::size_t tensor;
    Index offset;
  };
  std::vector<Element> elements;
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (!params[t].trainable) continue;
    for (Index i = 0; i < params[t].size(); ++i) elements.push_back({t, i});
  }
  const std::size_t limit = opt.max_elements == 0 ? 0 : std::max<std::size_t>(opt.max_elements, 200);
  if (limit > 0 && elements.size() > limit) {
    std::mt19937_64 engine(opt.subsample_seed);
    std::shuffle(elements.begin(), elements.end(), engine);
    elements.resize(limit);
    std::sort(elements.begin(), elements.end(), [](const Element& a, const Element& b) {
      return a.tensor != b.tensor ? a.tensor < b.tensor : a.offset < b.offset;
    });
  }

  auto evaluate = [&](bool& same_branch) {
    Tape<Scalar> tape(false);
    tape.set_track_branches(true);
    const auto v = build(tape).scalar();
    same_branch = same_branch && tape.branch_signature() == base_branches;
    return v;
  };

  for (const auto& e : elements) {
    auto& tensor = params[e.tensor];
    Scalar& w = tensor.value.data()[e.offset];
    const Scalar saved = w;
    bool smooth = true;
    w = saved + static_cast<Scalar>(opt.step);
    const Scalar plus = evaluate(smooth);
    w = saved - static_cast<Scalar>(opt.step);
    const Scalar minus = evaluate(smooth);
    w = saved;
    if (!smooth) {
      ++report.skipped_kinks;
      continue;
    }
    const double numeric = static_cast<double>((plus - minus) / (Scalar(2) * static_cast<Scalar>(opt.step)));
    const double analytic = static_cast<double>(tensor.grad.data()[e.offset]);
    const double err = relative_error(analytic, numeric);
    auto& worst = report.per_tensor[tensor.name];
    worst = std::max(worst, err);
    if (err > report.max_rel_error || report.worst_index < 0) {
      report.max_rel_error = std::max(report.max_rel_error, err);
      if (err >= report.max_rel_error) {
        report.worst_tensor = tensor.name;
        report.worst_index = e.offset;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
    ++report.checked;
  }
  report.passed = report.checked > 0 && report.max_rel_error < opt.tolerance &&
                  report.skipped_kinks * 20 <= elements.size();
  return report;
}

}  // namespace catvrnn
