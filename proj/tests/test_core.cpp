#include "doctest.h"
#include "helpers.hpp"

#include "minsurro/core/surrogate.hpp"

#include <cmath>
#include <cstring>

using namespace minsurro;
using testutil::random_model;
using testutil::uniform_vec;

namespace {

const std::vector<Family> kFamilies = {Family::Quadratic, Family::MaxAffine, Family::MaxSquared, Family::Icnn};

// Constant component value c for any x (quadratic with zero factor and slope).
ConvexComponent constant_component(int n_x, double c) {
    ComponentSpec s;
    s.family = Family::Quadratic;
    s.n_x = n_x;
    s.n_p = 0;
    ConvexComponent comp(s);
    for (auto& net : comp.nets()) net.bias(0).setZero();
    comp.nets()[2].bias(0)(0, 0) = c;
    return comp;
}

} // namespace

TEST_CASE("quadratic evaluator") {
    QuadraticCoeffs q;
    q.alpha = 1.0;
    q.lower = Mat::Zero(2, 2);
    q.linear = Vec::Zero(2);
    Vec x(2);
    x << 3, 4;
    CHECK(eval_quadratic(q, x) == doctest::Approx(25.0));

    q.alpha = 0.0;
    q.lower = Mat::Identity(2, 2);
    x << 1, 2;
    CHECK(eval_quadratic(q, x) == doctest::Approx(5.0));

    std::mt19937_64 rng(1);
    for (int t = 0; t < 20; ++t) {
        const int n = 4;
        Mat L = Mat::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= i; ++j) L(i, j) = uniform_vec(rng, 1)(0);
        q.alpha = 0.3;
        q.lower = L;
        q.linear = uniform_vec(rng, n);
        q.offset = 0.7;
        Vec xv = uniform_vec(rng, n, -2, 2);
        double oracle = 0.3 * xv.dot(xv) + xv.dot(L.transpose() * (L * xv)) + q.linear.dot(xv) + 0.7;
        CHECK(eval_quadratic(q, xv) == doctest::Approx(oracle).epsilon(1e-13));
    }
    CHECK_THROWS_AS(eval_quadratic(q, Vec::Zero(3)), ContractError);
}

TEST_CASE("max-affine and max-squared evaluators") {
    PiecewiseCoeffs q;
    q.slopes = Mat(1, 2);
    q.slopes << 1, 0;
    q.intercepts = Vec::Zero(1);
    Vec x(2);
    x << 2, 5;
    CHECK(eval_piecewise(q, x) == 2.0);

    q.slopes = Mat(2, 2);
    q.slopes << 1, 0, -1, 0;
    q.intercepts = Vec::Zero(2);
    x << 0.3, 9.0;
    CHECK(eval_piecewise(q, x) == doctest::Approx(0.3));

    std::mt19937_64 rng(2);
    for (int t = 0; t < 20; ++t) {
        q.slopes = Mat(10, 3);
        for (Eigen::Index i = 0; i < q.slopes.size(); ++i) q.slopes.data()[i] = uniform_vec(rng, 1)(0);
        q.intercepts = uniform_vec(rng, 10);
        Vec xv = uniform_vec(rng, 3);
        double mx = -1e300, sq = 0.0;
        for (int i = 0; i < 10; ++i) {
            double a = 0.0;
            for (int j = 0; j < 3; ++j) a += q.slopes(i, j) * xv(j);
            mx = std::max(mx, a + q.intercepts(i));
            double h = a - q.intercepts(i);
            if (h > 0) sq += h * h;
        }
        q.squared = false;
        CHECK(eval_piecewise(q, xv) == doctest::Approx(mx).epsilon(1e-14));
        q.squared = true;
        CHECK(eval_piecewise(q, xv) == doctest::Approx(sq).epsilon(1e-14));
    }

    q.squared = true;
    q.slopes = Mat::Ones(3, 2);
    q.intercepts = Vec::Constant(3, 1e9);
    CHECK(eval_piecewise(q, Vec::Ones(2)) == 0.0);
    q.slopes = Mat::Ones(1, 1);
    q.intercepts = Vec::Zero(1);
    CHECK(eval_piecewise(q, Vec::Constant(1, 2.0)) == 4.0);

    q.slopes = Mat(0, 2);
    q.intercepts = Vec(0);
    CHECK_THROWS_AS(eval_piecewise(q, Vec::Ones(2)), ContractError);
    ComponentSpec s;
    s.family = Family::MaxSquared;
    s.n_x = 2;
    s.pieces = 0;
    CHECK_THROWS_AS(ConvexComponent{s}, ContractError);
}

TEST_CASE("icnn evaluator against hand-unrolled passes") {
    // One hidden layer of width 2, input x = (1, 0).
    IcnnCoeffs q;
    Mat wx0(2, 2);
    wx0 << 1.0, -2.0, 0.5, 3.0;
    Vec b0(2);
    b0 << 0.1, -0.4;
    Mat wz1(1, 2);
    wz1 << 0.7, 1.3;
    Mat wx1(1, 2);
    wx1 << -0.2, 0.9;
    Vec b1(1);
    b1 << 0.05;
    q.wz = {Mat(), wz1};
    q.wx = {wx0, wx1};
    q.bias = {b0, b1};
    Vec x(2);
    x << 1.0, 0.0;
    const double z0 = std::log1p(std::exp(1.0 + 0.1));
    const double z1 = std::log1p(std::exp(0.5 - 0.4));
    const double oracle = 0.7 * z0 + 1.3 * z1 - 0.2 + 0.05;
    CHECK(eval_icnn(q, x) == doctest::Approx(oracle).epsilon(1e-14));

    // All-zero network returns the final bias.
    ComponentSpec s;
    s.family = Family::Icnn;
    s.n_x = 2;
    s.n_p = 2;
    s.icnn_hidden = {3, 3};
    s.context_dim = 2;
    ConvexComponent c(s);
    for (auto& m : c.icnn_params()) m.setZero();
    for (auto& net : c.nets())
        for (std::size_t l = 0; l < net.layer_count(); ++l) {
            net.weight(l).setZero();
            net.bias(l).setZero();
        }
    c.icnn_bias(2)(0, 0) = 1.75;
    // latent 0 still means softplus(0) > 0, so suppress the z-paths explicitly
    c.icnn_wz_latent(1).setConstant(-800.0);
    c.icnn_wz_latent(2).setConstant(-800.0);
    auto pay = c.coefficients(Vec::Zero(2));
    CHECK(eval_icnn(std::get<IcnnCoeffs>(pay), Vec::Ones(2)) == doctest::Approx(1.75));
}

TEST_CASE("icnn effective weights nonnegative, quadratic factor lower triangular") {
    auto m = random_model({Family::Icnn, Family::Quadratic}, 3, 2, 5, false, 0.1, 2.0);
    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t) {
        Vec p = uniform_vec(rng, 2);
        auto b = m.bind(p);
        const auto& ic = std::get<IcnnCoeffs>(b[0].payload());
        for (std::size_t l = 1; l < ic.wz.size(); ++l) CHECK(ic.wz[l].minCoeff() >= 0.0);
        const auto& qc = std::get<QuadraticCoeffs>(b[1].payload());
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j) CHECK(qc.lower(i, j) == 0.0);
    }
}

TEST_CASE("segment convexity for all four families") {
    for (auto fam : kFamilies) {
        CAPTURE(to_string(fam));
        std::mt19937_64 rng(100 + static_cast<int>(fam));
        std::uniform_real_distribution<double> lam(0.0, 1.0);
        int violations = 0;
        SurrogateModel m;
        for (int t = 0; t < 1000; ++t) {
            // fresh random instance every 100 triples
            if (t % 100 == 0) m = random_model({fam}, 3, 2, static_cast<std::uint64_t>(t) + 1, false, 0.1, 1.0);
            Vec p = uniform_vec(rng, 2);
            Vec x = uniform_vec(rng, 3, -3, 3), y = uniform_vec(rng, 3, -3, 3);
            double l = lam(rng);
            auto b = m.bind(p);
            double lhs = b[0].value(l * x + (1 - l) * y);
            double rhs = l * b[0].value(x) + (1 - l) * b[0].value(y);
            if (lhs > rhs + 1e-9) ++violations;
        }
        CHECK(violations == 0);
    }
}

TEST_CASE("quasiconvexity of head-composed components") {
    for (auto fam : kFamilies) {
        CAPTURE(to_string(fam));
        std::mt19937_64 rng(200 + static_cast<int>(fam));
        std::uniform_real_distribution<double> lam(0.0, 1.0);
        auto m = random_model({fam}, 2, 1, 9, true, 0.1, 1.0);
        int violations = 0;
        for (int t = 0; t < 1000; ++t) {
            Vec p = uniform_vec(rng, 1);
            Vec x = uniform_vec(rng, 2, -2, 2), y = uniform_vec(rng, 2, -2, 2);
            double l = lam(rng);
            double mid = m.head_values(l * x + (1 - l) * y, p)(0);
            double mx = std::max(m.head_values(x, p)(0), m.head_values(y, p)(0));
            if (mid > mx + 1e-9) ++violations;
        }
        CHECK(violations == 0);
    }
}

TEST_CASE("monotone heads") {
    MonotoneHead id;
    CHECK(id.eval(-1.03) == -1.03);

    auto h = MonotoneHead::network({5, 3}, {Activation::Tanh, Activation::Tanh});
    Rng rng(4);
    h.initialize(rng);
    std::mt19937_64 r2(4);
    std::normal_distribution<double> nd(0.0, 1.5);
    std::vector<Mat*> ps;
    h.collect(ps);
    for (Mat* m : ps)
        for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] += nd(r2);
    for (std::size_t l = 0; l < h.net().layer_count(); ++l) CHECK(h.net().effective_weight(l).minCoeff() >= 0.0);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    int bad = 0;
    for (int t = 0; t < 10000; ++t) {
        double a = u(r2), b = u(r2);
        if (a > b) std::swap(a, b);
        if (h.eval(a) > h.eval(b) + 1e-12) ++bad;
    }
    CHECK(bad == 0);

    for (auto act : {Activation::Softplus, Activation::Sigmoid, Activation::Relu}) {
        auto g = MonotoneHead::network({4}, {act});
        g.initialize(rng);
        for (int t = 0; t < 1000; ++t) {
            double a = u(r2), b = u(r2);
            if (a > b) std::swap(a, b);
            CHECK(g.eval(a) <= g.eval(b) + 1e-12);
        }
    }

    // Zero latent weights still give softplus(0) > 0; push them to -inf so the
    // map becomes constant.
    auto z = MonotoneHead::network({3}, {Activation::Tanh});
    for (std::size_t l = 0; l < z.net().layer_count(); ++l) z.net().weight(l).setConstant(-800.0);
    CHECK(z.eval(0.0) == z.eval(5.0));
    CHECK_THROWS(MonotoneHead::network({3}, {Activation::Identity}));
}

TEST_CASE("exact surrogate: min with lowest-index tie break") {
    std::vector<ConvexComponent> comps;
    comps.push_back(constant_component(2, 3.0));
    comps.push_back(constant_component(2, 5.0));
    SurrogateModel m(2, 0, comps, {MonotoneHead{}, MonotoneHead{}}, false, 0.1);
    auto r = m.exact(Vec::Zero(2), Vec(0));
    CHECK(r.value == 3.0);
    CHECK(r.index == 0);

    std::vector<ConvexComponent> tie{constant_component(2, 1.0), constant_component(2, 1.0)};
    SurrogateModel mt(2, 0, tie, {MonotoneHead{}, MonotoneHead{}}, false, 0.1);
    CHECK(mt.exact(Vec::Ones(2), Vec(0)).index == 0);
    CHECK(mt.smoothed(Vec::Ones(2), Vec(0)) == doctest::Approx(1.0 - 0.1 * std::log(2.0)).epsilon(1e-14));

    auto single = random_model({Family::Icnn}, 2, 1, 3, true);
    Vec x = Vec::Constant(2, 0.3), p = Vec::Constant(1, -0.2);
    CHECK(single.exact(x, p).value == single.head_values(x, p)(0));
    CHECK(single.exact(x, p).index == 0);

    auto m5 = random_model({Family::Quadratic, Family::MaxAffine, Family::MaxSquared, Family::Icnn, Family::Quadratic},
                           3, 2, 17, true);
    std::mt19937_64 rng(17);
    for (int t = 0; t < 200; ++t) {
        Vec xx = uniform_vec(rng, 3), pp = uniform_vec(rng, 2);
        double best = 1e300;
        int idx = -1;
        for (int i = 0; i < 5; ++i) {
            double v = m5.head(i).eval(m5.bind(pp)[static_cast<std::size_t>(i)].value(xx));
            if (v < best) {
                best = v;
                idx = i;
            }
        }
        auto r5 = m5.exact(xx, pp);
        CHECK(r5.value == best);
        CHECK(r5.index == idx);
    }
    CHECK_THROWS_AS(m5.exact(Vec::Zero(2), Vec::Zero(2)), ContractError);
}

TEST_CASE("smooth min formula and sandwich") {
    const double z3[] = {0.0, 1.0, 2.0};
    CHECK(smooth_min(z3, 1.0) == doctest::Approx(-std::log(1.0 + std::exp(-1.0) + std::exp(-2.0))).epsilon(1e-15));
    const double big[] = {1e4, 1e4 + 1.0};
    CHECK(std::isfinite(smooth_min(big, 1e-3)));
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    for (int t = 0; t < 10000; ++t) {
        std::vector<double> z(1 + t % 6);
        for (auto& v : z) v = u(rng);
        double g = std::exp(u(rng) / 10.0);
        double s = smooth_min(z, g);
        double mn = *std::min_element(z.begin(), z.end());
        CHECK(s <= mn + 1e-12);
        CHECK(s >= mn - g * std::log(static_cast<double>(z.size())) - 1e-12);
    }
}

TEST_CASE("smoothed approaches exact as gamma halves") {
    auto m = random_model({Family::Quadratic, Family::MaxSquared, Family::Icnn}, 2, 1, 21, true);
    std::mt19937_64 rng(21);
    for (int t = 0; t < 50; ++t) {
        Vec x = uniform_vec(rng, 2), p = uniform_vec(rng, 1);
        double exact = m.exact(x, p).value;
        double prev = 1e300;
        for (double g = 1.0; g >= 1.0 / 1024.0; g *= 0.5) {
            m.set_gamma(g);
            double gap = std::abs(m.smoothed(x, p) - exact);
            CHECK(gap <= prev);
            CHECK(gap <= g * std::log(3.0) + 1e-12);
            prev = gap;
        }
    }
}

TEST_CASE("theta round trip and contract checks") {
    auto m = random_model(kFamilies, 3, 2, 31, true);
    Vec th = m.gather();
    CHECK(static_cast<std::size_t>(th.size()) == m.parameter_count());
    auto copy = m;
    copy.scatter(th);
    Vec th2 = copy.gather();
    CHECK(std::memcmp(th.data(), th2.data(), sizeof(double) * static_cast<std::size_t>(th.size())) == 0);
    CHECK_THROWS_AS(copy.scatter(Vec::Zero(3)), ContractError);
    CHECK_THROWS_AS(m.set_gamma(0.0), ContractError);
    CHECK_THROWS_AS(SurrogateModel(3, 2, {}, {}, false, 0.1), ContractError);
}

TEST_CASE("tape evaluation agrees with direct evaluation") {
    for (bool heads : {false, true}) {
        auto m = random_model(kFamilies, 3, 2, 41, heads, 0.2);
        InputMap map = InputMap::from_boxes(Vec::Constant(3, -2), Vec::Constant(3, 3), Vec::Constant(2, 0),
                                            Vec::Constant(2, 4));
        m.set_input_map(map);
        std::mt19937_64 rng(41);
        const int B = 7;
        Mat X(3, B), P(2, B);
        for (int b = 0; b < B; ++b) {
            X.col(b) = uniform_vec(rng, 3, -2, 3);
            P.col(b) = uniform_vec(rng, 2, 0, 4);
        }
        ad::Tape tape;
        ParamBinding bind(tape);
        auto xv = tape.leaf(X);
        auto out = m.build_smoothed(bind, xv, tape.constant(P));
        ad::Var wrt[] = {xv};
        auto gx = tape.grad(ad::sum_all(out), wrt);
        for (int b = 0; b < B; ++b) {
            Vec x = X.col(b), p = P.col(b);
            CHECK(out.value()(0, b) == doctest::Approx(m.smoothed(x, p)).epsilon(1e-12));
            Vec w;
            Vec g = m.grad_x_smoothed(x, p, &w);
            Vec gt = gx[0]->value().col(b);
            CHECK(testutil::rel_err(g, gt) < 1e-10);
            CHECK(w.sum() == doctest::Approx(1.0));
            CHECK(w.minCoeff() >= 0.0);
        }
    }
}
