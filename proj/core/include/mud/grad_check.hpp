#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mud/autodiff.hpp"

namespace mud {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t elements_checked = 0;
    // Location of the worst element, for diagnostics.
    std::size_t worst_param = 0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

/// Compares reverse-mode gradients against central finite differences
/// (f(p+eps) - f(p-eps)) / (2 eps). `build` must construct a fresh scalar
/// graph over the given parameter leaves each call. Relative error uses
/// |a-n| / max(|a|, |n|, 1e-8).
///
/// `eps` is the starting step. Each element is re-measured at steps down to
/// eps/1000 while it disagrees, keeping the best match: around leaky-ReLU
/// kinks the secant needs a step small enough not to cross, whereas a wrong
/// gradient stays wrong at every step.
///
/// `sample_fraction` < 1 probes that fraction of each parameter's elements
/// (at least one per parameter), chosen by a seeded shuffle.
template <typename T>
GradCheckReport grad_check(const std::function<Var<T>()>& build,
                           const std::vector<Var<T>>& params,
                           double eps = 1e-4,
                           double sample_fraction = 1.0,
                           std::uint64_t sample_seed = 0);

}  // namespace mud
