#include "minsurro/diff/objective.hpp"

#include <cmath>

namespace minsurro {

GradReport gradcheck(Objective& fn, const Vec& point, double h, std::span<const Eigen::Index> coords) {
    require(h > 0.0, "gradcheck: step must be positive");
    require(point.size() == fn.dim(), "gradcheck: point has the wrong dimension");
    std::vector<Eigen::Index> idx(coords.begin(), coords.end());
    if (idx.empty())
        for (Eigen::Index i = 0; i < point.size(); ++i) idx.push_back(i);

    Vec full;
    fn.evaluate(point, &full);
    GradReport r;
    r.analytic.resize(static_cast<Eigen::Index>(idx.size()));
    r.numeric.resize(static_cast<Eigen::Index>(idx.size()));
    Vec x = point;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const Eigen::Index i = idx[k];
        require(i >= 0 && i < point.size(), "gradcheck: coordinate out of range");
        const double xi = x(i);
        x(i) = xi + h;
        const double fp = fn.evaluate(x, nullptr);
        x(i) = xi - h;
        const double fm = fn.evaluate(x, nullptr);
        x(i) = xi;
        const auto kk = static_cast<Eigen::Index>(k);
        r.analytic(kk) = full(i);
        r.numeric(kk) = (fp - fm) / (2.0 * h);
        const double a = r.analytic(kk), n = r.numeric(kk);
        const double abs_err = std::abs(a - n);
        r.max_abs_err = std::max(r.max_abs_err, abs_err);
        r.max_rel_err = std::max(r.max_rel_err, abs_err / std::max({1.0, std::abs(a), std::abs(n)}));
    }
    return r;
}

Vec grad_theta_loss(Objective& loss, const Vec& theta) {
    Vec g;
    const double v = loss.evaluate(theta, &g);
    if (!std::isfinite(v)) throw NonFiniteError("loss is not finite", -1);
    for (Eigen::Index i = 0; i < g.size(); ++i)
        if (!std::isfinite(g(i))) throw NonFiniteError("loss gradient is not finite", -1);
    return g;
}

} // namespace minsurro
