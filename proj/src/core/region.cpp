#include "minsurro/core/region.hpp"

#include <cmath>

namespace minsurro {

FeasibleRegion::FeasibleRegion(Vec lo, Vec hi)
    : lower(std::move(lo)), upper(std::move(hi)), rows(0, lower.size()), rhs(0) {
    validate_region(*this);
}

FeasibleRegion::FeasibleRegion(Vec lo, Vec hi, Mat a, Vec b)
    : lower(std::move(lo)), upper(std::move(hi)), rows(std::move(a)), rhs(std::move(b)) {
    validate_region(*this);
}

void FeasibleRegion::add_row(const Vec& a, double b) {
    require(a.size() == dim(), "FeasibleRegion::add_row: row length mismatch");
    rows.conservativeResize(rows.rows() + 1, dim());
    rows.row(rows.rows() - 1) = a.transpose();
    rhs.conservativeResize(rhs.size() + 1);
    rhs(rhs.size() - 1) = b;
}

bool FeasibleRegion::contains(const Vec& x, double tol) const {
    require(x.size() == dim(), "FeasibleRegion::contains: dimension mismatch");
    for (Eigen::Index i = 0; i < dim(); ++i) {
        if (x(i) < lower(i) - tol || x(i) > upper(i) + tol) return false;
    }
    if (row_count() > 0) {
        Vec ax = rows * x;
        for (Eigen::Index j = 0; j < ax.size(); ++j)
            if (ax(j) > rhs(j) + tol) return false;
    }
    return true;
}

Vec FeasibleRegion::clamp(const Vec& x) const {
    require(x.size() == dim(), "FeasibleRegion::clamp: dimension mismatch");
    return x.cwiseMax(lower).cwiseMin(upper);
}

Mat FeasibleRegion::stacked_matrix() const {
    const auto n = dim();
    Mat c(2 * n + row_count(), n);
    c.topRows(n) = Mat::Identity(n, n);
    c.middleRows(n, n) = -Mat::Identity(n, n);
    if (row_count() > 0) c.bottomRows(row_count()) = rows;
    return c;
}

Vec FeasibleRegion::stacked_rhs() const {
    const auto n = dim();
    Vec d(2 * n + row_count());
    d.head(n) = upper;
    d.segment(n, n) = -lower;
    if (row_count() > 0) d.tail(row_count()) = rhs;
    return d;
}

Vec FeasibleRegion::slacks(const Vec& x) const {
    return stacked_rhs() - stacked_matrix() * x;
}

void validate_region(const FeasibleRegion& region) {
    require(region.lower.size() == region.upper.size(),
            "FeasibleRegion: lower/upper length mismatch");
    for (Eigen::Index i = 0; i < region.lower.size(); ++i) {
        require(std::isfinite(region.lower(i)) && std::isfinite(region.upper(i)),
                "FeasibleRegion: box bounds must be finite");
        require(region.lower(i) <= region.upper(i), "FeasibleRegion: lower > upper");
    }
    require(region.rows.rows() == region.rhs.size(), "FeasibleRegion: rows/rhs mismatch");
    require(region.rows.rows() == 0 || region.rows.cols() == region.lower.size(),
            "FeasibleRegion: row width mismatch");
}

} // namespace minsurro
