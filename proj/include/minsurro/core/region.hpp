#pragma once

#include "minsurro/common.hpp"

namespace minsurro {

/// Box bounds plus affine inequality rows a_jᵀx <= b_j.
///
/// The box is always present (it is the compact domain); rows are optional.
/// When a full inequality description is needed, rows are ordered as
///   [ +e_0 .. +e_{n-1} | -e_0 .. -e_{n-1} | affine rows ]
/// i.e. upper-bound rows first, then lower-bound rows, then the affine rows.
struct FeasibleRegion {
    Vec lower;
    Vec upper;
    Mat rows;     // r x n
    Vec rhs;      // r

    FeasibleRegion() = default;
    FeasibleRegion(Vec lo, Vec hi);
    FeasibleRegion(Vec lo, Vec hi, Mat a, Vec b);

    Eigen::Index dim() const { return lower.size(); }
    Eigen::Index row_count() const { return rows.rows(); }
    bool is_box() const { return rows.rows() == 0; }

    /// Total number of inequalities in the stacked description (2n + r).
    Eigen::Index inequality_count() const { return 2 * dim() + row_count(); }

    void add_row(const Vec& a, double b);

    /// lower <= x <= upper and a_jᵀx <= b_j + tol for all rows; the box
    /// uses the same tolerance.
    bool contains(const Vec& x, double tol = 1e-9) const;

    /// Elementwise clamp onto the box (ignores rows).
    Vec clamp(const Vec& x) const;

    Vec center() const { return 0.5 * (lower + upper); }

    /// Stacked inequality description C x <= d in the order documented above.
    Mat stacked_matrix() const;
    Vec stacked_rhs() const;

    /// Slack d - C x of every stacked inequality.
    Vec slacks(const Vec& x) const;
};

/// Throws ContractError unless lower <= upper and all bounds are finite.
void validate_region(const FeasibleRegion& region);

} // namespace minsurro
