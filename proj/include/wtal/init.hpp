#pragma once

#include <cmath>

#include "wtal/matrix.hpp"
#include "wtal/rng.hpp"

namespace wtal {

// Glorot-style uniform init, U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
inline Matrix glorot_uniform(std::size_t rows, std::size_t cols, RngStream& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = a * (2.0 * rng.uniform() - 1.0);
    return m;
}

}  // namespace wtal
