#include "minsurro/solve/qp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <cmath>
#include <limits>

namespace minsurro {

QpResult solve_qp(const Mat& G, const Vec& a, const Mat& C, const Vec& d) {
    const Eigen::Index n = G.rows();
    const Eigen::Index m = C.rows();
    require(G.cols() == n && a.size() == n && (m == 0 || C.cols() == n) && d.size() == m,
            "solve_qp: dimension mismatch");
    Eigen::LLT<Mat> llt(G);
    require(llt.info() == Eigen::Success, "solve_qp: G must be positive definite");

    // Internally constraints read n_jᵀx >= b_j with n_j = -c_j, b_j = -d_j.
    const double inf = std::numeric_limits<double>::infinity();
    QpResult res;
    res.multipliers = Vec::Zero(m);
    Vec x = llt.solve(-a);
    std::vector<int> A;  // active constraints
    Vec u(0);            // their multipliers
    std::vector<double> row_scale(static_cast<std::size_t>(m));
    for (Eigen::Index j = 0; j < m; ++j)
        row_scale[static_cast<std::size_t>(j)] = std::max(1.0, C.row(j).lpNorm<Eigen::Infinity>());

    auto slack = [&](Eigen::Index j) { return d(j) - C.row(j).dot(x); };  // = n_jᵀx - b_j
    const int max_iter = static_cast<int>(20 * (n + m) + 100);
    int it = 0;

    for (;;) {
        // most violated constraint, scaled
        Eigen::Index p = -1;
        double worst = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            const double s = slack(j) / (row_scale[static_cast<std::size_t>(j)] * std::max(1.0, std::abs(d(j))));
            if (s < -1e-13 && s < worst) {
                worst = s;
                p = j;
            }
        }
        if (p < 0) break;
        Vec np = -C.row(p).transpose();
        double up = 0.0;

        for (;;) {
            if (++it > max_iter) {
                res.iterations = it;
                res.feasible = false;
                res.x = x;
                return res;
            }
            // [G N; Nᵀ 0] [z; r] = [n_p; 0]
            const auto k = static_cast<Eigen::Index>(A.size());
            Mat K = Mat::Zero(n + k, n + k);
            K.topLeftCorner(n, n) = G;
            for (Eigen::Index i = 0; i < k; ++i) {
                Vec ni = -C.row(A[static_cast<std::size_t>(i)]).transpose();
                K.block(0, n + i, n, 1) = ni;
                K.block(n + i, 0, 1, n) = ni.transpose();
            }
            Vec rhs = Vec::Zero(n + k);
            rhs.head(n) = np;
            Vec sol = K.fullPivLu().solve(rhs);
            Vec z = sol.head(n);
            Vec r = sol.tail(k);

            // dual (partial) step length
            double t1 = inf;
            Eigen::Index drop = -1;
            for (Eigen::Index i = 0; i < k; ++i) {
                if (r(i) > 1e-14) {
                    const double ti = u(i) / r(i);
                    if (ti < t1) {
                        t1 = ti;
                        drop = i;
                    }
                }
            }
            // primal (full) step length
            const double zn = z.dot(np);
            // zᵀn_p > 0 unless n_p depends on the active normals
            double t2 = inf;
            if (zn > 1e-14 * std::max(1.0, np.squaredNorm())) t2 = -slack(p) / zn;

            const double t = std::min(t1, t2);
            if (t == inf) {
                res.iterations = it;
                res.feasible = false;
                res.x = x;
                return res;
            }
            if (t2 == inf) {
                // dual-only step
                u -= t * r;
                up += t;
                A.erase(A.begin() + drop);
                Vec nu(u.size() - 1);
                for (Eigen::Index i = 0, o = 0; i < u.size(); ++i)
                    if (i != drop) nu(o++) = u(i);
                u = nu;
                continue;
            }
            x += t * z;
            u -= t * r;
            up += t;
            if (t == t2) {
                A.push_back(static_cast<int>(p));
                u.conservativeResize(u.size() + 1);
                u(u.size() - 1) = up;
                break;
            }
            A.erase(A.begin() + drop);
            Vec nu(u.size() - 1);
            for (Eigen::Index i = 0, o = 0; i < u.size(); ++i)
                if (i != drop) nu(o++) = u(i);
            u = nu;
        }
    }
    res.feasible = true;
    res.x = x;
    res.active = A;
    for (std::size_t i = 0; i < A.size(); ++i) res.multipliers(A[i]) = std::max(0.0, u(static_cast<Eigen::Index>(i)));
    res.value = 0.5 * x.dot(G * x) + a.dot(x);
    res.iterations = it;
    return res;
}

} // namespace minsurro
