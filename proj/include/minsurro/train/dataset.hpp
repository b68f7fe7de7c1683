#pragma once

#include "minsurro/common.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace minsurro {

struct Sample {
    Vec x;
    Vec p;
    double f = 0.0;
    std::optional<Vec> grad;  // ∇_x f(x, p)
    std::optional<Vec> dual;  // multipliers, optimal records only
    bool is_optimal = false;
};

/// ∇_x g(x, p) as an n_x x m matrix, one column per inequality row.
using ConstraintJacobian = std::function<Mat(const Vec& x, const Vec& p)>;

struct Dataset {
    int n_x = 0;
    int n_p = 0;
    int m = 0;  // dual length, 0 when no sample carries duals
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    std::size_t optimal_count() const;
    std::size_t gradient_count() const;

    /// Checks dimensions and the record invariants; throws DataError naming
    /// the first offending sample.
    void validate() const;
};

} // namespace minsurro
