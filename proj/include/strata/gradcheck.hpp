#pragma once

#include <functional>
#include <string>

#include "strata/tape.hpp"

namespace strata {

struct GradCheckConfig {
  double h = 1e-5;
  /// 0 = check every element; otherwise a deterministic sample of this size.
  std::size_t max_samples = 0;
  std::uint64_t sample_seed = 0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Central finite differences against tape gradients for a scalar-valued
/// computation. `build` must construct the full forward pass on the given
/// tape from the given store and return the loss Value; it is re-invoked
/// for every probe, so it must be deterministic.
/// Relative error uses denominator max(1e-10, |analytic|, |fd|).
GradCheckReport grad_check(ParameterStore& store,
                           const std::function<Value(Tape&, ParameterStore&)>& build,
                           const GradCheckConfig& cfg = {});

} // namespace strata
