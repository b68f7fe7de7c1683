#include "minsurro/solve/convex.hpp"

#include "minsurro/parallel.hpp"
#include "minsurro/solve/qp.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

namespace minsurro {

std::string to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::IterLimit: return "iter_limit";
    case SolveStatus::Infeasible: return "infeasible";
    }
    return "unknown";
}

bool check_feasibility(const FeasibleRegion& region, const Vec& x, double tol) {
    require(x.size() == region.dim(), "check_feasibility: dimension mismatch");
    return region.contains(x, tol);
}

namespace {

bool project_qp(const FeasibleRegion& region, const Vec& y, Vec& out) {
    const auto n = region.dim();
    auto qp = solve_qp(Mat::Identity(n, n), -y, region.stacked_matrix(), region.stacked_rhs());
    if (!qp.feasible) return false;
    out = region.clamp(qp.x);
    return true;
}

double max_violation(const FeasibleRegion& region, const Vec& x) {
    double v = 0.0;
    v = std::max(v, (region.lower - x).maxCoeff());
    v = std::max(v, (x - region.upper).maxCoeff());
    if (!region.is_box()) v = std::max(v, (region.rows * x - region.rhs).maxCoeff());
    return v;
}

} // namespace

bool project(const FeasibleRegion& region, const Vec& y, Vec& out) {
    require(y.size() == region.dim(), "project: dimension mismatch");
    if (region.is_box()) {
        out = region.clamp(y);
        return true;
    }
    // Dykstra over {box, halfspace_1, ..., halfspace_r}.
    const Eigen::Index r = region.row_count();
    const auto sets = static_cast<std::size_t>(r + 1);
    std::vector<Vec> incr(sets, Vec::Zero(y.size()));
    Vec x = y;
    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;
    for (int cycle = 0; cycle < 2000; ++cycle) {
        Vec before = x;
        double incr_change = 0.0;
        for (std::size_t s = 0; s < sets; ++s) {
            Vec z = x + incr[s];
            if (s == 0) {
                x = region.clamp(z);
            } else {
                const auto j = static_cast<Eigen::Index>(s - 1);
                const Vec a = region.rows.row(j).transpose();
                const double excess = a.dot(z) - region.rhs(j);
                const double aa = a.squaredNorm();
                x = (excess > 0.0 && aa > 0.0) ? Vec(z - (excess / aa) * a) : z;
            }
            Vec next = z - x;
            incr_change = std::max(incr_change, (next - incr[s]).lpNorm<Eigen::Infinity>());
            incr[s] = std::move(next);
        }
        // x alone can stall for a cycle while the increments still move
        const double change = std::max((x - before).lpNorm<Eigen::Infinity>(), incr_change);
        const double scale = 1.0 + x.lpNorm<Eigen::Infinity>();
        if (change <= 1e-15 * scale && max_violation(region, x) <= 1e-14 * scale) {
            out = region.clamp(x);
            return true;
        }
        if (change < best * 0.999) {
            best = change;
            since_best = 0;
        } else if (++since_best >= 100) {
            break;  // plateau
        }
    }
    return project_qp(region, y, out);
}

double projected_gradient_residual(const FeasibleRegion& region, const Vec& x, const Vec& g) {
    Vec px;
    if (!project(region, x - g, px)) return std::numeric_limits<double>::infinity();
    return (x - px).lpNorm<Eigen::Infinity>();
}

namespace {

// Projected Newton step on a difference Hessian; returns true when it lowers f.
bool newton_step(const SmoothFn& f, const FeasibleRegion& region, Vec& x, double& fx, Vec& g) {
    const auto n = x.size();
    Mat H(n, n);
    Vec gp, gm;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(x(i)));
        Vec xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        f(xp, gp);
        f(xm, gm);
        H.col(i) = (gp - gm) / (2.0 * h);
    }
    H = 0.5 * (H + H.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    if (es.info() != Eigen::Success) return false;
    Vec ev = es.eigenvalues();
    const double floor = 1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    ev = ev.cwiseMax(floor);
    H = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    const Mat C = region.stacked_matrix();
    const Vec d = region.stacked_rhs() - C * x;
    auto qp = solve_qp(H, g, C, d.cwiseMax(0.0));
    if (!qp.feasible) return false;
    const Vec dir = qp.x;
    const double slope = g.dot(dir);
    if (!(slope < 0.0)) return false;
    Vec gn;
    for (double a = 1.0; a > 1e-10; a *= 0.5) {
        Vec xn = x + a * dir;
        if (!region.contains(xn, 0.0) && !project(region, xn, xn)) return false;
        const double fn = f(xn, gn);
        if (std::isfinite(fn) && fn <= fx + 1e-4 * a * slope) {
            x = xn;
            fx = fn;
            g = gn;
            return true;
        }
    }
    return false;
}

} // namespace

SubproblemSolution minimize_smooth(const SmoothFn& f, const FeasibleRegion& region, const SolverOptions& opts,
                                   const Vec* start) {
    SubproblemSolution sol;
    Vec x;
    if (!project(region, start ? *start : region.center(), x)) {
        sol.status = SolveStatus::Infeasible;
        sol.x_opt = region.center();
        sol.value = std::numeric_limits<double>::quiet_NaN();
        sol.kkt_residual = std::numeric_limits<double>::infinity();
        return sol;
    }
    Vec g, gn, xn;
    double fx = f(x, g);
    double res = projected_gradient_residual(region, x, g);
    double step = 1.0 / std::max(1.0, g.lpNorm<Eigen::Infinity>());
    int k = 0;
    for (; k < opts.max_iters && res > opts.tol; ++k) {
        if (k >= 3 && (res < 1e-4 || k % 20 == 0)) {
            Vec xs = x, gs = g;
            if (newton_step(f, region, x, fx, g)) {
                const Vec s = x - xs, y = g - gs;
                const double sy = s.dot(y);
                if (sy > 0.0) step = s.squaredNorm() / sy;
                res = projected_gradient_residual(region, x, g);
                continue;
            }
        }
        bool accepted = false;
        double fn = 0.0;
        double t = std::clamp(step, 1e-12, 1e12);
        for (int bt = 0; bt < 60; ++bt, t *= 0.5) {
            if (!project(region, x - t * g, xn)) break;
            fn = f(xn, gn);
            if (!std::isfinite(fn)) continue;
            if (fn <= fx + 1e-4 * g.dot(xn - x)) {
                accepted = true;
                break;
            }
            // rounding floor: accept a flat step that still lowers the residual
            if (fn <= fx + 1e-14 * std::max(1.0, std::abs(fx)) &&
                projected_gradient_residual(region, xn, gn) < res) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (!newton_step(f, region, x, fx, g)) break;
            res = projected_gradient_residual(region, x, g);
            continue;
        }
        const Vec s = xn - x, y = gn - g;
        const double sy = s.dot(y);
        step = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * t;
        x = xn;
        fx = fn;
        g = gn;
        res = projected_gradient_residual(region, x, g);
    }
    sol.x_opt = x;
    sol.value = fx;
    sol.iterations = k;
    sol.kkt_residual = res;
    sol.status = res <= opts.tol ? SolveStatus::Optimal : SolveStatus::IterLimit;
    return sol;
}

namespace {

// min_x max(S x + c) over the region as the LP min t s.t. S x − t <= −c,
// solved by proximal-point iterations, each a strictly convex QP.
SubproblemSolution solve_max_affine(const BoundComponent& comp, const FeasibleRegion& region,
                                    const SolverOptions& opts, const Vec* start) {
    auto [S, c] = comp.raw_affine_pieces();
    const auto n = region.dim();
    const auto L = S.rows();
    SubproblemSolution sol;
    Vec x;
    if (!project(region, start ? *start : region.center(), x)) {
        sol.status = SolveStatus::Infeasible;
        sol.x_opt = region.center();
        sol.value = std::numeric_limits<double>::quiet_NaN();
        sol.kkt_residual = std::numeric_limits<double>::infinity();
        return sol;
    }
    const Mat Cr = region.stacked_matrix();
    const Vec dr = region.stacked_rhs();
    Mat C = Mat::Zero(L + Cr.rows(), n + 1);
    C.topLeftCorner(L, n) = S;
    C.topRightCorner(L, 1).setConstant(-1.0);
    C.bottomLeftCorner(Cr.rows(), n) = Cr;
    Vec d(L + dr.size());
    d << -c, dr;

    const double mu = 1e3 * (1.0 + (region.upper - region.lower).lpNorm<Eigen::Infinity>());
    Vec w(n + 1);
    w << x, (S * x + c).maxCoeff();
    const Mat G = Mat::Identity(n + 1, n + 1) / mu;
    Vec e = Vec::Zero(n + 1);
    e(n) = 1.0;
    double res = std::numeric_limits<double>::infinity();
    int k = 0;
    for (; k < opts.max_iters; ++k) {
        auto qp = solve_qp(G, e - w / mu, C, d);
        if (!qp.feasible) break;
        res = (qp.x - w).lpNorm<Eigen::Infinity>() / mu;
        w = qp.x;
        if (res <= 1e-3 * opts.max_affine_tol) break;
    }
    sol.x_opt = region.clamp(w.head(n));
    sol.value = (S * sol.x_opt + c).maxCoeff();
    sol.iterations = k;
    sol.kkt_residual = res;
    sol.status = res <= opts.max_affine_tol ? SolveStatus::Optimal : SolveStatus::IterLimit;
    return sol;
}

} // namespace

SubproblemSolution solve_subproblem(const BoundComponent& component, const FeasibleRegion& region,
                                    const SolverOptions& opts, const Vec* start) {
    validate_region(region);
    require(component.dim() == region.dim(), "solve_subproblem: dimension mismatch");
    if (component.family() == Family::MaxAffine) return solve_max_affine(component, region, opts, start);
    return minimize_smooth([&](const Vec& x, Vec& g) { return component.value_grad(x, g); }, region, opts, start);
}

DecompositionResult decompose_solve(const SurrogateModel& model, const Vec& p, const FeasibleRegion& region,
                                    const SolverOptions& opts) {
    require(region.dim() == model.n_x(), "decompose_solve: region dimension mismatch");
    auto bound = model.bind(p);
    DecompositionResult out;
    out.per_component.resize(bound.size());
    parallel_for(
        bound.size(), [&](std::size_t i) { out.per_component[i] = solve_subproblem(bound[i], region, opts); },
        opts.parallel);

    auto pick = [&](SolveStatus wanted) {
        for (int i = 0; i < model.K(); ++i) {
            const auto& s = out.per_component[static_cast<std::size_t>(i)];
            if (s.status != wanted) continue;
            const double h = model.head(i).eval(s.value);
            if (out.winner < 0 || h < out.value_star) {
                out.winner = i;
                out.value_star = h;
            }
        }
    };
    pick(SolveStatus::Optimal);
    out.status = SolveStatus::Optimal;
    if (out.winner < 0) {
        pick(SolveStatus::IterLimit);
        out.status = out.winner < 0 ? SolveStatus::Infeasible : SolveStatus::IterLimit;
    }
    if (out.winner >= 0) out.x_star = out.per_component[static_cast<std::size_t>(out.winner)].x_opt;
    return out;
}

} // namespace minsurro
