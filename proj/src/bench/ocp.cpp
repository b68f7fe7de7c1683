#include "minsurro/bench/ocp.hpp"

#include "minsurro/io/format.hpp"
#include "minsurro/parallel.hpp"
#include "minsurro/solve/qp.hpp"
#include "minsurro/train/sampling.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

namespace minsurro {

namespace {

constexpr double kPi = std::numbers::pi;

struct CurveDerivs {
    double x, y, dx, dy, ddx, ddy;
};

CurveDerivs curve(double t) {
    using P = LissajousPath;
    const double ca = std::cos(P::a * t + P::delta), sa = std::sin(P::a * t + P::delta);
    const double cb = std::cos(P::b * t), sb = std::sin(P::b * t);
    return {P::A * sa,
            P::B * sb,
            P::A * P::a * ca,
            P::B * P::b * cb,
            -P::A * P::a * P::a * sa,
            -P::B * P::b * P::b * sb};
}

double speed(double t) {
    const auto c = curve(t);
    return std::hypot(c.dx, c.dy);
}

double simpson_arc(double t0, double t1) {
    return (t1 - t0) / 6.0 * (speed(t0) + 4.0 * speed(0.5 * (t0 + t1)) + speed(t1));
}

double wrap01(double s) {
    s -= std::floor(s);
    return s >= 1.0 ? 0.0 : s;
}

} // namespace

double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * kPi);
    return a <= -kPi ? a + 2.0 * kPi : a;
}

PathPoint lissajous_point(double t) {
    const auto c = curve(t);
    const double v2 = c.dx * c.dx + c.dy * c.dy;
    if (v2 < 1e-18) throw ContractError("lissajous_point: degenerate tangent");
    return {c.x, c.y, std::atan2(c.dy, c.dx), (c.dx * c.ddy - c.dy * c.ddx) / std::pow(v2, 1.5)};
}

// ---------------------------------------------------------------- path

LissajousPath::LissajousPath(int samples) {
    require(samples >= 16, "LissajousPath: too few samples");
    t_ = Vec::LinSpaced(samples + 1, 0.0, 2.0 * kPi);
    arc_.resize(samples + 1);
    arc_(0) = 0.0;
    for (int i = 0; i < samples; ++i) arc_(i + 1) = arc_(i) + simpson_arc(t_(i), t_(i + 1));
    length_ = arc_(samples);
}

double LissajousPath::t_at(double s) const {
    const double target = wrap01(s) * length_;
    const auto it = std::upper_bound(arc_.data(), arc_.data() + arc_.size(), target);
    Eigen::Index i = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(it - arc_.data()) - 1, 0, arc_.size() - 2);
    double t = t_(i) + (target - arc_(i)) / speed(t_(i));
    for (int k = 0; k < 3; ++k) t -= (arc_(i) + simpson_arc(t_(i), t) - target) / speed(t);
    return t;
}

PathPoint LissajousPath::at(double s) const { return lissajous_point(t_at(s)); }

namespace {

// Arc position (m) of curve parameter t within the table range.
double arc_of(const LissajousPath& path, double t) {
    const Vec& tt = path.t_table();
    const auto it = std::upper_bound(tt.data(), tt.data() + tt.size(), t);
    Eigen::Index i = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(it - tt.data()) - 1, 0, tt.size() - 2);
    return path.s_table()(i) + simpson_arc(tt(i), t);
}

} // namespace

FrenetState frenet_from_cartesian(const Pose& pose, const LissajousPath& path, std::optional<double> s_hint) {
    const Vec& tt = path.t_table();
    const Vec& arc = path.s_table();
    const double L = path.length();
    const double hint = s_hint ? wrap01(*s_hint) * L : 0.0;
    constexpr double window = 1.5;  // m of arc either side of the hint
    Eigen::Index best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    double best_u = 0.0;
    auto prev = curve(tt(0));
    for (Eigen::Index i = 0; i + 1 < tt.size(); ++i) {
        const auto next = curve(tt(i + 1));
        if (s_hint) {
            double gap = std::abs(arc(i) - hint);
            gap = std::min(gap, L - gap);
            if (gap > window) {
                prev = next;
                continue;
            }
        }
        const double ex = next.x - prev.x, ey = next.y - prev.y;
        double u = ((pose.x - prev.x) * ex + (pose.y - prev.y) * ey) / (ex * ex + ey * ey);
        u = std::clamp(u, 0.0, 1.0);
        const double dist = std::hypot(prev.x + u * ex - pose.x, prev.y + u * ey - pose.y);
        if (dist < best_dist - 1e-6) {
            best_dist = dist;
            best = i;
            best_u = u;
        }
        prev = next;
    }
    // Newton on the tangency condition (c(t) − q)·c'(t) = 0.
    double t = tt(best) + best_u * (tt(best + 1) - tt(best));
    for (int k = 0; k < 20; ++k) {
        const auto c = curve(t);
        const double rx = c.x - pose.x, ry = c.y - pose.y;
        const double g = rx * c.dx + ry * c.dy;
        const double h = c.dx * c.dx + c.dy * c.dy + rx * c.ddx + ry * c.ddy;
        if (h <= 0.0) break;
        const double step = g / h;
        t -= step;
        if (std::abs(step) < 1e-14) break;
    }
    const double period = 2.0 * kPi;
    t -= period * std::floor(t / period);
    const auto pt = lissajous_point(t);
    FrenetState f;
    f.s = wrap01(arc_of(path, t) / path.length());
    f.d = -(pose.x - pt.x) * std::sin(pt.heading) + (pose.y - pt.y) * std::cos(pt.heading);
    f.theta = wrap_angle(pose.psi - pt.heading);
    return f;
}

Pose cartesian_from_frenet(const FrenetState& f, const LissajousPath& path) {
    const auto pt = path.at(f.s);
    return {pt.x - f.d * std::sin(pt.heading), pt.y + f.d * std::cos(pt.heading), wrap_angle(pt.heading + f.theta)};
}

FrenetState frenet_dynamics_step(const FrenetState& x, double v, double omega, const LissajousPath& path,
                                 double dt) {
    const double kappa = path.at(x.s).curvature;
    const double den = 1.0 - x.d * kappa;
    if (std::abs(den) <= 1e-6) throw ContractError("frenet_dynamics_step: state beyond the curvature radius");
    const double L = path.length();
    const double s_dot = v * std::cos(x.theta) / (L * den);
    FrenetState n;
    n.s = wrap01(x.s + dt * s_dot);
    n.d = x.d + dt * v * std::sin(x.theta);
    n.theta = x.theta + dt * (omega - kappa * L * s_dot);
    return n;
}

FrenetState plant_step(const FrenetState& x, double v, double omega, const LissajousPath& path, double dt) {
    Pose q = cartesian_from_frenet(x, path);
    const double turn = omega * dt;
    if (std::abs(turn) > 1e-9) {
        q.x += v / omega * (std::sin(q.psi + turn) - std::sin(q.psi));
        q.y -= v / omega * (std::cos(q.psi + turn) - std::cos(q.psi));
    } else {
        q.x += v * dt * std::cos(q.psi);
        q.y += v * dt * std::sin(q.psi);
    }
    q.psi = wrap_angle(q.psi + turn);
    return frenet_from_cartesian(q, path, x.s + v * dt / path.length());
}

// ---------------------------------------------------------------- OCP

OcpSpec OcpSpec::standard(double track_length) {
    OcpSpec s;
    s.track_length = track_length;
    s.q[0] = 5.0 * track_length;
    s.q_n[0] = 100.0 * track_length;
    return s;
}

Vec ocp_parameter(const FrenetState& x, const LissajousPath& path, const OcpSpec& spec) {
    Vec p(spec.n_p());
    p(0) = x.s;
    p(1) = x.d;
    p(2) = x.theta;
    const double ds = spec.v_ref * spec.dt / path.length();
    double prev = path.at(x.s).heading, acc = 0.0;
    p(3) = 0.0;
    for (int k = 1; k <= spec.horizon; ++k) {
        const double h = path.at(x.s + k * ds).heading;
        acc += wrap_angle(h - prev);
        prev = h;
        p(3 + k) = acc;
    }
    return p;
}

namespace {

void check_ocp_dims(const Vec& u, const Vec& p, const OcpSpec& spec) {
    require(u.size() == spec.n_u(), "ocp: u has the wrong length");
    require(p.size() == spec.n_p(), "ocp: p has the wrong length");
}

double step_kappa(const Vec& p, const OcpSpec& spec, int k) {
    return (p(4 + k) - p(3 + k)) / (spec.v_ref * spec.dt);
}

int block_of(const OcpSpec& spec, int k) { return std::min(k, spec.blocking); }

} // namespace

OcpRollout ocp_rollout(const Vec& u, const Vec& p, const OcpSpec& spec) {
    check_ocp_dims(u, p, spec);
    const int N = spec.horizon;
    const double alpha = spec.dt / spec.track_length;
    OcpRollout r;
    r.states.resize(3, N + 1);
    r.reference.resize(3, N + 1);
    r.states.col(0) << p(0), p(1), p(2);
    for (int k = 0; k <= N; ++k) r.reference.col(k) << p(0) + k * spec.v_ref * alpha, 0.0, p(3 + k);
    for (int k = 0; k < N; ++k) {
        const int b = block_of(spec, k);
        const double v = u(2 * b), w = u(2 * b + 1);
        const double e = r.states(2, k) - p(3 + k);
        const double den = 1.0 - r.states(1, k) * step_kappa(p, spec, k);
        if (std::abs(den) <= 1e-6) throw ContractError("ocp_rollout: state beyond the curvature radius");
        r.states(0, k + 1) = r.states(0, k) + alpha * v * std::cos(e) / den;
        r.states(1, k + 1) = r.states(1, k) + spec.dt * v * std::sin(e);
        r.states(2, k + 1) = r.states(2, k) + spec.dt * w;
    }
    return r;
}

double curvature_margin(const Vec& u, const Vec& p, const OcpSpec& spec) {
    check_ocp_dims(u, p, spec);
    double d = p(1), heading = p(2), margin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < spec.horizon; ++k) {
        const int b = block_of(spec, k);
        margin = std::min(margin, 1.0 - d * step_kappa(p, spec, k));
        d += spec.dt * u(2 * b) * std::sin(heading - p(3 + k));
        heading += spec.dt * u(2 * b + 1);
    }
    return margin;
}

double ocp_objective(const Vec& u, const Vec& p, const OcpSpec& spec, Vec* grad) {
    const auto r = ocp_rollout(u, p, spec);
    const int N = spec.horizon;
    const Mat err = r.states - r.reference;
    double cost = 0.0;
    for (int k = 0; k <= N; ++k) {
        const auto& q = k < N ? spec.q : spec.q_n;
        for (int j = 0; j < 3; ++j) cost += q[static_cast<std::size_t>(j)] * err(j, k) * err(j, k);
    }
    for (int k = 0; k < N; ++k) {
        const int b = block_of(spec, k);
        cost += spec.r * (u(2 * b) * u(2 * b) + u(2 * b + 1) * u(2 * b + 1));
    }
    if (!grad) return cost;

    grad->setZero(u.size());
    const double alpha = spec.dt / spec.track_length;
    Eigen::Vector3d adj;
    for (int j = 0; j < 3; ++j) adj(j) = 2.0 * spec.q_n[static_cast<std::size_t>(j)] * err(j, N);
    for (int k = N - 1; k >= 0; --k) {
        const int b = block_of(spec, k);
        const double v = u(2 * b);
        const double e = r.states(2, k) - p(3 + k);
        const double kap = step_kappa(p, spec, k);
        const double den = 1.0 - r.states(1, k) * kap;
        const double c = std::cos(e), sn = std::sin(e);
        (*grad)(2 * b) += adj(0) * alpha * c / den + adj(1) * spec.dt * sn + 2.0 * spec.r * v;
        (*grad)(2 * b + 1) += adj(2) * spec.dt + 2.0 * spec.r * u(2 * b + 1);
        if (k == 0) break;
        // adjoint of x_k: transpose of the step Jacobian plus the stage term
        Eigen::Vector3d prev;
        prev(0) = adj(0);
        prev(1) = adj(0) * alpha * v * c * kap / (den * den) + adj(1);
        prev(2) = -adj(0) * alpha * v * sn / den + adj(1) * spec.dt * v * c + adj(2);
        for (int j = 0; j < 3; ++j) prev(j) += 2.0 * spec.q[static_cast<std::size_t>(j)] * err(j, k);
        adj = prev;
    }
    return cost;
}

FeasibleRegion ocp_constraints(const Vec& p, const OcpSpec& spec) {
    require(p.size() == spec.n_p(), "ocp_constraints: p has the wrong length");
    const int n = spec.n_u();
    Vec lo(n), hi(n);
    for (int b = 0; b <= spec.blocking; ++b) {
        lo(2 * b) = 0.0;
        hi(2 * b) = spec.v_max;
        lo(2 * b + 1) = -spec.omega_max;
        hi(2 * b + 1) = spec.omega_max;
    }
    // d_1 = d_0 + dt·sin(θ_0 − Δψ_0)·v_0
    const double slope = spec.dt * std::sin(p(2) - p(3));
    Mat rows = Mat::Zero(2, n);
    Vec rhs(2);
    rows(0, 0) = slope;
    rhs(0) = std::max(spec.half_width - p(1), 0.0);
    rows(1, 0) = -slope;
    rhs(1) = std::max(spec.half_width + p(1), 0.0);
    return FeasibleRegion(lo, hi, rows, rhs);
}

Mat ocp_constraint_jacobian(const Vec& p, const OcpSpec& spec) {
    return ocp_constraints(p, spec).stacked_matrix().transpose();
}

double stationarity_residual(const Vec& u, const Vec& lambda, const Vec& p, const OcpSpec& spec) {
    require(lambda.size() == spec.row_count(), "stationarity_residual: λ has the wrong length");
    require((lambda.array() >= 0.0).all(), "stationarity_residual: λ must be nonnegative");
    Vec g;
    ocp_objective(u, p, spec, &g);
    return (g + ocp_constraint_jacobian(p, spec) * lambda).norm();
}

Vec estimate_duals(const Vec& u, const Vec& p, const OcpSpec& spec, double active_tol) {
    Vec g;
    ocp_objective(u, p, spec, &g);
    const auto region = ocp_constraints(p, spec);
    const Mat J = region.stacked_matrix().transpose();
    const Vec slack = region.slacks(u);
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < slack.size(); ++j)
        if (slack(j) <= active_tol) active.push_back(j);
    Vec lambda = Vec::Zero(J.cols());
    while (!active.empty()) {
        Mat JA(J.rows(), static_cast<Eigen::Index>(active.size()));
        for (std::size_t c = 0; c < active.size(); ++c) JA.col(static_cast<Eigen::Index>(c)) = J.col(active[c]);
        const Vec la = JA.completeOrthogonalDecomposition().solve(-g);
        std::vector<Eigen::Index> keep;
        for (std::size_t c = 0; c < active.size(); ++c)
            if (la(static_cast<Eigen::Index>(c)) >= 0.0) keep.push_back(active[c]);
        if (keep.size() == active.size()) {
            for (std::size_t c = 0; c < active.size(); ++c) lambda(active[c]) = la(static_cast<Eigen::Index>(c));
            break;
        }
        active = std::move(keep);
    }
    return lambda;
}

double kkt_residual(const Vec& u, const Vec& p, const OcpSpec& spec) {
    return stationarity_residual(u, estimate_duals(u, p, spec), p, spec);
}

namespace {

// Trial points past the curvature radius count as +inf.
double trial_cost(const Vec& u, const Vec& p, const OcpSpec& spec) {
    try {
        return ocp_objective(u, p, spec);
    } catch (const ContractError&) {
        return std::numeric_limits<double>::infinity();
    }
}

double safe_residual(const Vec& u, const Vec& p, const OcpSpec& spec) {
    try {
        return kkt_residual(u, p, spec);
    } catch (const ContractError&) {
        return std::numeric_limits<double>::infinity();
    }
}

Mat difference_hessian(const Vec& u, const Vec& p, const OcpSpec& spec) {
    const auto n = u.size();
    Mat H(n, n);
    Vec gp, gm;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double h = 1e-5 * std::max(1.0, std::abs(u(j)));
        Vec up = u, um = u;
        up(j) += h;
        um(j) -= h;
        ocp_objective(up, p, spec, &gp);
        ocp_objective(um, p, spec, &gm);
        H.col(j) = (gp - gm) / (2.0 * h);
    }
    H = 0.5 * (H + H.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    const double top = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    const Vec ev = es.eigenvalues().cwiseMax(1e-8 * top);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

} // namespace

SqpResult sqp_refine(const Vec& u_init, const Vec& p, const OcpSpec& spec, int max_iters, double tol) {
    check_ocp_dims(u_init, p, spec);
    const auto region = ocp_constraints(p, spec);
    Vec u = u_init;
    if (!region.contains(u, 1e-12)) {
        Vec proj;
        if (!project(region, u_init, proj)) throw ContractError("sqp_refine: empty feasible region");
        u = proj;
    }
    const Mat C = region.stacked_matrix();
    const Vec d = region.stacked_rhs();

    SqpResult out;
    double res = safe_residual(u, p, spec);
    if (!std::isfinite(res)) {
        // singular rollout: retry standing still with the same turn rates
        Vec still = u;
        for (int b = 0; b <= spec.blocking; ++b) still(2 * b) = 0.0;
        if (region.contains(still, 1e-12) && std::isfinite(safe_residual(still, p, spec))) {
            u = still;
            res = safe_residual(u, p, spec);
        }
    }
    out.residual_history.push_back(res);
    Vec best_u = u;
    double best_res = res;
    for (int it = 0; it < max_iters && res > tol && std::isfinite(res); ++it) {
        Vec g, step;
        double f;
        try {
            f = ocp_objective(u, p, spec, &g);
            const Mat H = difference_hessian(u, p, spec);
            const auto qp = solve_qp(H, g, C, (d - C * u).cwiseMax(0.0));
            if (!qp.feasible) break;
            step = qp.x;
        } catch (const ContractError&) {
            break;
        }
        const double slope = g.dot(step);
        if (!(slope < 0.0)) break;
        double t = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
            if (trial_cost(u + t * step, p, spec) <= f + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        u += t * step;
        ++out.iterations;
        res = safe_residual(u, p, spec);
        out.residual_history.push_back(res);
        if (res < best_res) {
            best_res = res;
            best_u = u;
        }
    }
    out.u = best_u;
    out.residual = best_res;
    if (std::isfinite(best_res)) {
        out.lambda = estimate_duals(best_u, p, spec);
        out.value = ocp_objective(best_u, p, spec);
    } else {
        out.lambda = Vec::Zero(spec.row_count());
        out.value = std::numeric_limits<double>::infinity();
    }
    return out;
}

namespace {

// Reference-speed guess: v = v_ref, ω following the reference heading rate.
Vec reference_guess(const Vec& p, const OcpSpec& spec) {
    Vec u(spec.n_u());
    for (int b = 0; b <= spec.blocking; ++b) {
        const int k = std::min(b, spec.horizon - 1);
        u(2 * b) = spec.v_ref;
        u(2 * b + 1) = std::clamp(step_kappa(p, spec, k) * spec.v_ref, -spec.omega_max, spec.omega_max);
    }
    return u;
}

} // namespace

ReferenceSolution solve_ocp_reference(const Vec& p, const OcpSpec& spec, double tol) {
    const auto region = ocp_constraints(p, spec);
    std::vector<Vec> starts{reference_guess(p, spec), Vec::Zero(spec.n_u()), region.center()};
    ReferenceSolution best;
    for (const auto& s : starts) {
        SqpResult r;
        try {
            r = sqp_refine(s, p, spec, 200, tol);
        } catch (const ContractError&) {
            continue;
        }
        if (r.residual > std::max(tol, 1e-6)) continue;
        if (!best.ok || r.value < best.value) {
            best.ok = true;
            best.u = r.u;
            best.lambda = r.lambda;
            best.value = r.value;
            best.residual = r.residual;
        }
    }
    if (best.ok) ocp_objective(best.u, p, spec, &best.grad);
    return best;
}

// ---------------------------------------------------------------- data

namespace {

FeasibleRegion input_box(const OcpSpec& spec) {
    const auto r = ocp_constraints(Vec::Zero(spec.n_p()), spec);
    return FeasibleRegion(r.lower, r.upper);
}

int default_lap_steps(const OcpConfig& cfg, const LissajousPath& path, const OcpSpec& spec) {
    if (cfg.lap_steps > 0) return cfg.lap_steps;
    return static_cast<int>(std::ceil(path.length() / (spec.v_ref * spec.dt)));
}

Vec shifted(const Vec& u, const OcpSpec& spec) {
    Vec s = u;
    for (int b = 0; b < spec.blocking; ++b) s.segment(2 * b, 2) = u.segment(2 * b + 2, 2);
    return s;
}

struct LapOutput {
    std::vector<Sample> samples;
    std::size_t near_singular = 0;
    std::vector<std::string> log;
};

LapOutput run_lap(int lap, const OcpConfig& cfg, const LissajousPath& path, const OcpSpec& spec) {
    LapOutput out;
    std::mt19937_64 rng(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(lap));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto sym = [&](double r) { return r * (2.0 * unit(rng) - 1.0); };

    FrenetState x;
    x.s = unit(rng);
    x.d = sym(cfg.init_d);
    x.theta = sym(cfg.init_theta);
    const int steps = default_lap_steps(cfg, path, spec);
    const int picks = std::min(cfg.problems_per_lap, steps);
    std::vector<int> idx(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < picks; ++i) {
        std::uniform_int_distribution<int> pick(i, steps - 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    std::vector<char> sampled(static_cast<std::size_t>(steps), 0);
    for (int i = 0; i < picks; ++i) sampled[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = 1;

    const auto box = input_box(spec);
    Vec delta(spec.n_u());
    for (int b = 0; b <= spec.blocking; ++b) delta.segment(2 * b, 2) << spec.v_max, spec.omega_max;

    Vec prev;
    for (int t = 0; t < steps; ++t) {
        const Vec p = ocp_parameter(x, path, spec);
        Vec u;
        if (sampled[static_cast<std::size_t>(t)]) {
            const auto ref = solve_ocp_reference(p, spec);
            if (!ref.ok) {
                out.log.push_back("lap " + std::to_string(lap) + " step " + std::to_string(t) +
                                  ": no start converged, problem skipped");
            } else {
                u = ref.u;
                out.samples.push_back({ref.u, p, ref.value, ref.grad, ref.lambda, true});
                for (const auto& ua : projected_sample(box, delta, static_cast<std::size_t>(cfg.augment), rng)) {
                    if (curvature_margin(ua, p, spec) < cfg.curvature_margin) {
                        ++out.near_singular;
                        continue;
                    }
                    Vec g;
                    const double f = ocp_objective(ua, p, spec, &g);
                    out.samples.push_back({ua, p, f, g, {}, false});
                }
            }
        }
        if (u.size() == 0) {
            const Vec guess = prev.size() ? shifted(prev, spec) : reference_guess(p, spec);
            u = sqp_refine(guess, p, spec, 100).u;
        }
        prev = u;
        x = plant_step(x, u(0), u(1), path, spec.dt);
        x.d += sym(cfg.train_perturb_d);
        x.theta += sym(cfg.train_perturb_theta);
    }
    return out;
}

} // namespace

Dataset collect_dataset(const OcpConfig& cfg, const LissajousPath& path, const OcpSpec& spec,
                        std::vector<std::string>* log) {
    require(cfg.laps >= 0 && cfg.problems_per_lap >= 0 && cfg.augment >= 0, "collect_dataset: negative count");
    std::vector<LapOutput> laps(static_cast<std::size_t>(cfg.laps));
    parallel_for(laps.size(), [&](std::size_t i) { laps[i] = run_lap(static_cast<int>(i), cfg, path, spec); });
    Dataset d;
    d.n_x = spec.n_u();
    d.n_p = spec.n_p();
    d.m = spec.row_count();
    std::size_t skipped = 0;
    for (auto& lap : laps) {
        for (auto& s : lap.samples) d.samples.push_back(std::move(s));
        if (log) log->insert(log->end(), lap.log.begin(), lap.log.end());
        skipped += lap.near_singular;
    }
    if (log && skipped > 0)
        log->push_back(std::to_string(skipped) + " augmented points skipped near the curvature singularity");
    return d;
}

SurrogateModel ocp_model(const OcpConfig& cfg, const OcpSpec& spec, const Dataset& data) {
    require(cfg.K >= 1, "ocp_model: K must be >= 1");
    ComponentSpec c;
    c.family = Family::Icnn;
    c.n_x = spec.n_u();
    c.n_p = spec.n_p();
    c.icnn_hidden = cfg.icnn_hidden;
    c.context_dim = cfg.context_dim;
    c.encoder_layers = 2;
    std::vector<ConvexComponent> comps(static_cast<std::size_t>(cfg.K), ConvexComponent(c));
    std::vector<MonotoneHead> heads(static_cast<std::size_t>(cfg.K), MonotoneHead::identity());
    SurrogateModel m(spec.n_u(), spec.n_p(), std::move(comps), std::move(heads), false, cfg.gamma);

    const auto box = input_box(spec);
    Vec plo = Vec::Zero(spec.n_p()), phi = Vec::Zero(spec.n_p());
    if (!data.empty()) {
        plo = data.samples.front().p;
        phi = plo;
        for (const auto& s : data.samples) {
            plo = plo.cwiseMin(s.p);
            phi = phi.cwiseMax(s.p);
        }
    }
    m.set_input_map(InputMap::from_boxes(box.lower, box.upper, plo, phi));
    return m;
}

TrainResult train_ocp(const OcpConfig& cfg, const OcpSpec& spec, const Dataset& data) {
    TrainConfig tc;
    tc.weights = {cfg.w1, cfg.w2};
    tc.gamma = cfg.gamma;
    tc.adam.epochs = cfg.adam_epochs;
    tc.adam.learning_rate = cfg.learning_rate;
    tc.finetune.enabled = cfg.finetune_iterations > 0;
    tc.finetune.iterations = cfg.finetune_iterations;
    tc.restarts = cfg.restarts;
    tc.seed = cfg.seed;
    tc.selection = Selection::TrainR2;
    const OcpSpec sp = spec;
    return train(ocp_model(cfg, spec, data), data, tc,
                 [sp](const Vec&, const Vec& p) { return ocp_constraint_jacobian(p, sp); });
}

// ---------------------------------------------------------------- closed loop

std::string to_string(InitMethod m) {
    switch (m) {
        case InitMethod::Cold: return "cold";
        case InitMethod::ShiftedFull: return "shifted_full";
        case InitMethod::Shifted2: return "shifted_2";
        case InitMethod::LearnedFull: return "learned_full";
        case InitMethod::Learned2: return "learned_2";
    }
    return "?";
}

InitMethod init_method_from_string(const std::string& s) {
    for (auto m : {InitMethod::Cold, InitMethod::ShiftedFull, InitMethod::Shifted2, InitMethod::LearnedFull,
                   InitMethod::Learned2})
        if (to_string(m) == s) return m;
    throw ContractError("unknown init method '" + s + "'");
}

SimReport closed_loop_sim(InitMethod method, const OcpConfig& cfg, const LissajousPath& path, const OcpSpec& spec,
                          std::uint64_t seed, const SurrogateModel* model) {
    const bool learned = method == InitMethod::LearnedFull || method == InitMethod::Learned2;
    const bool shifted_mode = method == InitMethod::ShiftedFull || method == InitMethod::Shifted2;
    const bool two = method == InitMethod::Shifted2 || method == InitMethod::Learned2;
    require(!learned || model != nullptr, "closed_loop_sim: learned methods need a model");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::pair<double, double>> kicks(static_cast<std::size_t>(cfg.sim_steps));
    for (auto& k : kicks) {
        k.first = cfg.test_perturb_d * (2.0 * unit(rng) - 1.0);
        k.second = cfg.test_perturb_theta * (2.0 * unit(rng) - 1.0);
    }

    SimReport rep;
    rep.method = method;
    FrenetState x;
    Vec prev;
    SolverOptions sopts;
    for (int t = 0; t < cfg.sim_steps; ++t) {
        const Vec p = ocp_parameter(x, path, spec);
        const auto region = ocp_constraints(p, spec);
        SimStep st;
        st.state = x;
        st.pose = cartesian_from_frenet(x, path);
        Vec guess = Vec::Zero(spec.n_u());
        if (shifted_mode && prev.size()) guess = shifted(prev, spec);
        if (learned) {
            const auto sol = decompose_solve(*model, p, region, sopts);
            if (sol.winner >= 0 && sol.status != SolveStatus::Infeasible) {
                guess = sol.x_star;
            } else {
                st.fallback = true;
                ++rep.fallbacks;
            }
        }
        if (!region.contains(guess, 1e-12)) {
            Vec proj;
            if (project(region, guess, proj)) guess = proj;
        }
        st.residual_guess = safe_residual(guess, p, spec);
        const auto ref = sqp_refine(guess, p, spec, two ? 2 : 200);
        st.residual_refined = ref.residual;
        st.sqp_iterations = ref.iterations;
        st.u = ref.u.head(2);
        rep.steps.push_back(st);
        prev = ref.u;
        x = plant_step(x, ref.u(0), ref.u(1), path, spec.dt);
        x.d += kicks[static_cast<std::size_t>(t)].first;
        x.theta += kicks[static_cast<std::size_t>(t)].second;
    }
    return rep;
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double max_pose_gap(const SimReport& a, const SimReport& b) {
    double gap = 0.0;
    const std::size_t n = std::min(a.steps.size(), b.steps.size());
    for (std::size_t i = 0; i < n; ++i)
        gap = std::max(gap, std::hypot(a.steps[i].pose.x - b.steps[i].pose.x, a.steps[i].pose.y - b.steps[i].pose.y));
    return gap;
}

void write_sim_outputs(const std::vector<SimReport>& reports, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json j;
    auto modes = nlohmann::ordered_json::object();
    for (const auto& rep : reports) {
        const std::string name = to_string(rep.method);
        std::ofstream out(dir / ("ocp_sim_" + name + ".csv"));
        if (!out) throw std::runtime_error("cannot write simulation file in " + dir.string());
        out << "step,x,y,psi,s,d,theta,v,omega,residual_at_guess,residual_after_refine,sqp_iters,fallback\n";
        std::vector<double> rg, rr;
        double iters = 0.0, max_d = 0.0;
        for (std::size_t i = 0; i < rep.steps.size(); ++i) {
            const auto& s = rep.steps[i];
            out << i << ',' << format_double(s.pose.x) << ',' << format_double(s.pose.y) << ','
                << format_double(s.pose.psi) << ',' << format_double(s.state.s) << ',' << format_double(s.state.d)
                << ',' << format_double(s.state.theta) << ',' << format_double(s.u(0)) << ','
                << format_double(s.u(1)) << ',' << format_double(s.residual_guess) << ','
                << format_double(s.residual_refined) << ',' << s.sqp_iterations << ',' << (s.fallback ? 1 : 0)
                << '\n';
            rg.push_back(s.residual_guess);
            rr.push_back(s.residual_refined);
            iters += s.sqp_iterations;
            max_d = std::max(max_d, std::abs(s.state.d));
        }
        nlohmann::ordered_json m;
        m["steps"] = rep.steps.size();
        m["median_residual_at_guess"] = median(rg);
        m["median_residual_after_refine"] = median(rr);
        m["mean_sqp_iterations"] = rep.steps.empty() ? 0.0 : iters / static_cast<double>(rep.steps.size());
        m["max_abs_d"] = max_d;
        m["fallbacks"] = rep.fallbacks;
        modes[name] = m;
    }
    j["modes"] = modes;
    auto gaps = nlohmann::ordered_json::array();
    for (std::size_t a = 0; a < reports.size(); ++a)
        for (std::size_t b = a + 1; b < reports.size(); ++b) {
            nlohmann::ordered_json g;
            g["a"] = to_string(reports[a].method);
            g["b"] = to_string(reports[b].method);
            g["max_pose_gap"] = max_pose_gap(reports[a], reports[b]);
            gaps.push_back(g);
        }
    j["pose_gaps"] = gaps;
    std::ofstream out(dir / "ocp_residuals.json");
    if (!out) throw std::runtime_error("cannot write ocp_residuals.json in " + dir.string());
    out << j.dump(2) << '\n';
}

} // namespace minsurro
