#include "minsurro/train/sampling.hpp"

namespace minsurro {

Vec project_onto_region(const FeasibleRegion& region, const Vec& x) {
    require(x.size() == region.dim(), "project_onto_region: dimension mismatch");
    return region.clamp(x);
}

std::vector<Vec> projected_sample(const FeasibleRegion& region, const Vec& delta, std::size_t count,
                                  std::mt19937_64& rng) {
    require(delta.size() == region.dim(), "projected_sample: delta dimension mismatch");
    require((delta.array() >= 0.0).all(), "projected_sample: delta must be nonnegative");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec> out;
    out.reserve(count);
    const Vec lo = region.lower - delta;
    const Vec width = region.upper - region.lower + 2.0 * delta;
    for (std::size_t k = 0; k < count; ++k) {
        Vec x(region.dim());
        for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = lo(i) + width(i) * u(rng);
        out.push_back(project_onto_region(region, x));
    }
    return out;
}

std::vector<Vec> sample_parameters(ParamMode mode, const Vec& lower, const Vec& upper,
                                   const std::vector<Vec>& inherited, std::size_t count, std::mt19937_64& rng) {
    std::vector<Vec> out;
    out.reserve(count);
    if (mode == ParamMode::Inherited) {
        if (inherited.empty()) throw DataError("sample_parameters: inherited list is empty");
        for (std::size_t k = 0; k < count; ++k) out.push_back(inherited[k % inherited.size()]);
        return out;
    }
    require(lower.size() == upper.size() && (lower.array() <= upper.array()).all(),
            "sample_parameters: invalid parameter box");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t k = 0; k < count; ++k) {
        Vec p(lower.size());
        for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = lower(i) + (upper(i) - lower(i)) * u(rng);
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace minsurro
