#include "minsurro/train/dataset.hpp"

#include <cmath>

namespace minsurro {

std::size_t Dataset::optimal_count() const {
    std::size_t n = 0;
    for (const auto& s : samples) n += s.dual.has_value() ? 1 : 0;
    return n;
}

std::size_t Dataset::gradient_count() const {
    std::size_t n = 0;
    for (const auto& s : samples) n += s.grad.has_value() ? 1 : 0;
    return n;
}

void Dataset::validate() const {
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const auto& s = samples[k];
        auto fail = [&](const std::string& why) {
            throw DataError("sample " + std::to_string(k) + ": " + why);
        };
        if (s.x.size() != n_x) fail("x has length " + std::to_string(s.x.size()) + ", expected " + std::to_string(n_x));
        if (s.p.size() != n_p) fail("p has length " + std::to_string(s.p.size()) + ", expected " + std::to_string(n_p));
        if (!s.x.allFinite() || !s.p.allFinite() || !std::isfinite(s.f)) fail("non-finite mandatory value");
        if (s.grad) {
            if (s.grad->size() != n_x) fail("gradient length mismatch");
            if (!s.grad->allFinite()) fail("non-finite gradient");
        }
        if (s.dual) {
            if (!s.is_optimal) fail("dual present on a non-optimal record");
            if (s.dual->size() != m) fail("dual length mismatch");
            if (!s.dual->allFinite() || s.dual->minCoeff() < 0.0) fail("dual must be finite and nonnegative");
        }
    }
}

} // namespace minsurro
