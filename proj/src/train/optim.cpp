#include "minsurro/train/optim.hpp"

#include <cmath>
#include <deque>

namespace minsurro {

OptResult adam(Objective& obj, Vec x, const AdamOptions& o, const IterCallback& cb) {
    require(o.epochs >= 0 && o.learning_rate > 0.0, "adam: invalid options");
    Vec m = Vec::Zero(x.size()), v = Vec::Zero(x.size()), g;
    OptResult r;
    for (int t = 1; t <= o.epochs; ++t) {
        const double f = obj.evaluate(x, &g);
        if (!std::isfinite(f) || !g.allFinite()) throw NonFiniteError("adam: non-finite loss", -1);
        if (cb) cb(t - 1, x, f);
        m = o.beta1 * m + (1.0 - o.beta1) * g;
        v = o.beta2 * v + (1.0 - o.beta2) * g.cwiseAbs2();
        const double c1 = 1.0 - std::pow(o.beta1, t);
        const double c2 = 1.0 - std::pow(o.beta2, t);
        x.array() -= o.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + o.eps);
        r.iterations = t;
    }
    r.value = obj.evaluate(x, nullptr);
    r.x = std::move(x);
    return r;
}

namespace {

struct Trial {
    double a, f, d;  // step, value, directional derivative
    Vec g;
};

// Minimiser of the cubic interpolating (a, fa, da) and (b, fb, db), kept
// inside the bracket with a safeguard.
double cubic_step(const Trial& lo, const Trial& hi) {
    const double d1 = lo.d + hi.d - 3.0 * (lo.f - hi.f) / (lo.a - hi.a);
    const double disc = d1 * d1 - lo.d * hi.d;
    const double left = std::min(lo.a, hi.a), right = std::max(lo.a, hi.a);
    if (disc >= 0.0) {
        const double d2 = std::copysign(std::sqrt(disc), hi.a - lo.a);
        const double t = hi.a - (hi.a - lo.a) * (hi.d + d2 - d1) / (hi.d - lo.d + 2.0 * d2);
        const double margin = 0.1 * (right - left);
        if (std::isfinite(t) && t > left + margin && t < right - margin) return t;
    }
    return 0.5 * (left + right);
}

// Strong-Wolfe search along d from x (value f0, slope d0 < 0). Returns false
// when no acceptable step is found.
bool wolfe_search(Objective& obj, const Vec& x, double f0, double d0, const Vec& d, double a1,
                  const LbfgsOptions& o, Trial& out) {
    auto eval = [&](double a) {
        Trial t;
        t.a = a;
        t.f = obj.evaluate(x + a * d, &t.g);
        t.d = std::isfinite(t.f) ? t.g.dot(d) : std::numeric_limits<double>::quiet_NaN();
        return t;
    };
    Trial prev{0.0, f0, d0, {}};
    double a = a1;
    int evals = 0;
    auto zoom = [&](Trial lo, Trial hi) {
        while (evals < o.max_line_search) {
            Trial t = eval(cubic_step(lo, hi));
            ++evals;
            if (!std::isfinite(t.f) || t.f > f0 + o.c1 * t.a * d0 || t.f >= lo.f) {
                hi = t;
            } else {
                if (std::abs(t.d) <= -o.c2 * d0) {
                    out = std::move(t);
                    return true;
                }
                if (t.d * (hi.a - lo.a) >= 0.0) hi = lo;
                lo = std::move(t);
            }
            if (std::abs(hi.a - lo.a) < 1e-16 * std::max(1.0, lo.a)) break;
        }
        // Settle for a sufficient-decrease point if one was seen.
        if (lo.a > 0.0 && lo.f < f0) {
            out = std::move(lo);
            return true;
        }
        return false;
    };
    while (evals < o.max_line_search) {
        Trial t = eval(a);
        ++evals;
        if (!std::isfinite(t.f)) {
            // shrink back toward the last finite point
            a = 0.5 * (prev.a + a);
            continue;
        }
        if (t.f > f0 + o.c1 * a * d0 || (evals > 1 && t.f >= prev.f)) return zoom(prev, t);
        if (std::abs(t.d) <= -o.c2 * d0) {
            out = std::move(t);
            return true;
        }
        if (t.d >= 0.0) return zoom(t, prev);
        prev = std::move(t);
        a *= 2.0;
    }
    if (prev.a > 0.0 && prev.f < f0) {
        out = std::move(prev);
        return true;
    }
    return false;
}

} // namespace

OptResult lbfgs(Objective& obj, Vec x, const LbfgsOptions& o, const IterCallback& cb) {
    require(o.iterations >= 0 && o.memory >= 1, "lbfgs: invalid options");
    Vec g;
    double f = obj.evaluate(x, &g);
    if (!std::isfinite(f) || !g.allFinite()) throw NonFiniteError("lbfgs: non-finite loss at start", -1);
    std::deque<Vec> S, Y;
    std::deque<double> rho;
    OptResult r;
    for (int k = 0; k < o.iterations; ++k) {
        if (g.lpNorm<Eigen::Infinity>() <= o.grad_tol) break;
        // two-loop recursion
        Vec q = g;
        std::vector<double> alpha(S.size());
        for (std::size_t i = S.size(); i-- > 0;) {
            alpha[i] = rho[i] * S[i].dot(q);
            q -= alpha[i] * Y[i];
        }
        if (!S.empty()) q *= S.back().dot(Y.back()) / Y.back().squaredNorm();
        for (std::size_t i = 0; i < S.size(); ++i) {
            const double beta = rho[i] * Y[i].dot(q);
            q += (alpha[i] - beta) * S[i];
        }
        Vec d = -q;
        double d0 = g.dot(d);
        if (!(d0 < 0.0)) {
            S.clear();
            Y.clear();
            rho.clear();
            d = -g;
            d0 = -g.squaredNorm();
        }
        const double a1 = S.empty() ? std::min(1.0, 1.0 / g.lpNorm<Eigen::Infinity>()) : 1.0;
        Trial t;
        if (!wolfe_search(obj, x, f, d0, d, a1, o, t)) {
            if (S.empty()) break;
            S.clear();
            Y.clear();
            rho.clear();
            continue;
        }
        if (!(t.f <= f)) break;
        Vec s = t.a * d;
        Vec y = t.g - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            S.push_back(std::move(s));
            Y.push_back(std::move(y));
            rho.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > o.memory) {
                S.pop_front();
                Y.pop_front();
                rho.pop_front();
            }
        }
        x += t.a * d;
        f = t.f;
        g = std::move(t.g);
        r.iterations = k + 1;
        if (cb) cb(k, x, f);
    }
    r.x = std::move(x);
    r.value = f;
    return r;
}

} // namespace minsurro
