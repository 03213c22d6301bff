#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "wtal/adam.hpp"

namespace wtal {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_coord = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t coords_checked = 0;

    bool ok(double tol) const { return max_rel_err < tol; }
};

// Compares analytic gradients against central finite differences
// (f(x+h) - f(x-h)) / 2h, coordinate by coordinate. `fn(ps, want_grad)`
// evaluates the scalar under test at the current parameter values and, when
// want_grad is set, accumulates analytic gradients into ps.
//
// max_coords_per_tensor = 0 checks every coordinate; otherwise a seeded
// subset per tensor is probed (large tensors would make full FD quadratic).
// Relative error uses denominator max(|analytic|, |numeric|, 1e-8).
GradCheckReport grad_check(ParamSet& params,
                           const std::function<double(ParamSet&, bool)>& fn,
                           double h = 1e-5,
                           std::size_t max_coords_per_tensor = 0,
                           std::uint64_t seed = 0);

}  // namespace wtal
