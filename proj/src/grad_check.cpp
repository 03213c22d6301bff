#include "wtal/grad_check.hpp"

#include <cmath>
#include <vector>

#include "wtal/errors.hpp"
#include "wtal/rng.hpp"

namespace wtal {

GradCheckReport grad_check(ParamSet& params,
                           const std::function<double(ParamSet&, bool)>& fn,
                           double h, std::size_t max_coords_per_tensor,
                           std::uint64_t seed) {
    if (h <= 0.0) throw ArgumentError("grad_check: h must be positive");

    params.zero_grads();
    const double base = fn(params, true);
    if (!std::isfinite(base)) {
        throw ArgumentError("grad_check: non-finite value at base point");
    }
    std::vector<Matrix> analytic;
    analytic.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) analytic.push_back(params[i].grad);

    GradCheckReport report;
    RngStream rng(seed, 0x6fd);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param& p = params[i];
        const std::size_t n = p.value.size();
        std::vector<std::size_t> coords;
        if (max_coords_per_tensor == 0 || n <= max_coords_per_tensor) {
            coords.resize(n);
            for (std::size_t k = 0; k < n; ++k) coords[k] = k;
        } else {
            coords.resize(n);
            for (std::size_t k = 0; k < n; ++k) coords[k] = k;
            rng.shuffle(coords);
            coords.resize(max_coords_per_tensor);
        }
        for (std::size_t k : coords) {
            const double saved = p.value[k];
            p.value[k] = saved + h;
            const double fp = fn(params, false);
            p.value[k] = saved - h;
            const double fm = fn(params, false);
            p.value[k] = saved;
            if (!std::isfinite(fp) || !std::isfinite(fm)) {
                throw ArgumentError("grad_check: non-finite value at '" + p.name +
                                    "' coordinate " + std::to_string(k));
            }
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[i][k];
            const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            const double rel = std::fabs(a - numeric) / denom;
            report.coords_checked += 1;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = p.name;
                report.worst_coord = k;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    return report;
}

}  // namespace wtal
