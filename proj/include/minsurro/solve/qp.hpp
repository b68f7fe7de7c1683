#pragma once

#include "minsurro/common.hpp"

#include <vector>

namespace minsurro {

struct QpResult {
    bool feasible = false;
    Vec x;
    Vec multipliers;          // one per inequality, >= 0
    std::vector<int> active;  // indices of the final active set
    double value = 0.0;
    int iterations = 0;
};

/// Dense dual active-set solver (Goldfarb–Idnani) for
///   min ½ xᵀ G x + aᵀ x   s.t.  C x <= d
/// with G symmetric positive definite. Sized for the small problems in this
/// library (tens of variables and constraints).
QpResult solve_qp(const Mat& G, const Vec& a, const Mat& C, const Vec& d);

} // namespace minsurro
