#pragma once

#include "minsurro/common.hpp"

#include <functional>

namespace testutil {

using minsurro::Mat;
using minsurro::Vec;

// Central differences, written independently of the library's gradcheck.
inline Vec fd_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-6) {
    Vec g(x.size());
    Vec xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double xi = x(i);
        xp(i) = xi + h;
        const double fp = f(xp);
        xp(i) = xi - h;
        const double fm = f(xp);
        xp(i) = xi;
        g(i) = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline double rel_err(const Vec& a, const Vec& b) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double d = std::abs(a(i) - b(i)) / std::max({1.0, std::abs(a(i)), std::abs(b(i))});
        m = std::max(m, d);
    }
    return m;
}

inline Mat flat_to_mat(const Vec& v, Eigen::Index r, Eigen::Index c) {
    return Eigen::Map<const Mat>(v.data(), r, c);
}

} // namespace testutil

#include "minsurro/core/surrogate.hpp"

#include <random>

namespace testutil {

inline minsurro::ComponentSpec spec_for(minsurro::Family fam, int n_x, int n_p) {
    minsurro::ComponentSpec s;
    s.family = fam;
    s.n_x = n_x;
    s.n_p = n_p;
    s.alpha = 0.1;
    s.pieces = 4;
    if (n_p > 0) s.coeff_hidden = {4};
    s.icnn_hidden = {4, 3};
    s.context_dim = 3;
    return s;
}

// Random model with initialized and then jittered parameters, so biases and
// context paths are nonzero too.
inline minsurro::SurrogateModel random_model(const std::vector<minsurro::Family>& fams, int n_x, int n_p,
                                             std::uint64_t seed, bool net_heads, double gamma = 0.1,
                                             double jitter = 0.3) {
    using namespace minsurro;
    std::vector<ConvexComponent> comps;
    for (auto f : fams) comps.emplace_back(spec_for(f, n_x, n_p));
    std::vector<MonotoneHead> heads;
    const std::size_t nh = fams.size();
    for (std::size_t i = 0; i < nh; ++i) {
        if (net_heads)
            heads.push_back(MonotoneHead::network({3, 2}, {Activation::Tanh, Activation::Softplus}));
        else
            heads.push_back(MonotoneHead::identity());
    }
    SurrogateModel m(n_x, n_p, std::move(comps), std::move(heads), false, gamma);
    m.initialize(seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> nd(0.0, jitter);
    Vec th = m.gather();
    for (Eigen::Index i = 0; i < th.size(); ++i) th(i) += nd(rng);
    m.scatter(th);
    return m;
}

inline Vec uniform_vec(std::mt19937_64& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
    return v;
}

} // namespace testutil
