#include "doctest.h"
#include "helpers.hpp"

#include "minsurro/diff/objective.hpp"
#include "minsurro/train/loss.hpp"

#include <cstring>

using namespace minsurro;
using testutil::random_model;
using testutil::uniform_vec;

namespace {

// Random dataset with gradients on every other sample and duals on a few.
Dataset random_dataset(int n_x, int n_p, int m, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Dataset d;
    d.n_x = n_x;
    d.n_p = n_p;
    d.m = m;
    for (int k = 0; k < count; ++k) {
        Sample s;
        s.x = uniform_vec(rng, n_x);
        s.p = uniform_vec(rng, n_p);
        s.f = uniform_vec(rng, 1, -2, 2)(0);
        if (k % 2 == 0) s.grad = uniform_vec(rng, n_x);
        if (k % 3 == 0) {
            s.is_optimal = true;
            s.dual = uniform_vec(rng, m, 0, 1);
        }
        d.samples.push_back(s);
    }
    return d;
}

// ∇_x g: a fixed matrix plus a p-dependent column, to exercise the callback.
Mat jac(const Vec& x, const Vec& p) {
    Mat J(x.size(), 3);
    J.col(0) = Vec::Ones(x.size());
    J.col(1) = Vec::LinSpaced(x.size(), -1.0, 1.0);
    J.col(2) = Vec::Constant(x.size(), p(0));
    return J;
}

} // namespace

TEST_CASE("gradcheck on a quadratic is exact to rounding") {
    Mat A(3, 3);
    A << 2, 0.5, 0, 0.5, 3, -1, 0, -1, 4;
    Vec b(3);
    b << 1, -2, 0.5;
    FunctionObjective q(3, [&](const Vec& x, Vec* g) {
        if (g) *g = A * x + b;
        return 0.5 * x.dot(A * x) + b.dot(x);
    });
    Vec x0(3);
    x0 << 0.3, -0.7, 1.1;
    auto rep = gradcheck(q, x0);
    CHECK(rep.max_rel_err <= 1e-9);
    CHECK(rep.analytic.size() == 3);
    // max_rel_err follows its definition
    double oracle = 0.0;
    for (int i = 0; i < 3; ++i)
        oracle = std::max(oracle, std::abs(rep.analytic(i) - rep.numeric(i)) /
                                      std::max({1.0, std::abs(rep.analytic(i)), std::abs(rep.numeric(i))}));
    CHECK(rep.max_rel_err == oracle);
}

TEST_CASE("grad_x_smoothed examples and finite differences") {
    ComponentSpec s;
    s.family = Family::Quadratic;
    s.n_x = 2;
    s.alpha = 1.0;
    ConvexComponent c(s);
    for (auto& net : c.nets()) net.bias(0).setZero();
    SurrogateModel m(2, 0, {c}, {MonotoneHead{}}, false, 0.1);
    Vec x(2);
    x << 1, -2;
    Vec g = m.grad_x_smoothed(x, Vec(0));
    CHECK(g(0) == doctest::Approx(2.0));
    CHECK(g(1) == doctest::Approx(-4.0));

    auto one = random_model({Family::Icnn}, 3, 2, 3, true);
    auto two = random_model({Family::Icnn, Family::Icnn}, 3, 2, 3, true);
    // make the second copy's components identical to the single one
    two.component(0) = one.component(0);
    two.component(1) = one.component(0);
    two.heads()[0] = one.heads()[0];
    two.heads()[1] = one.heads()[0];
    Vec xx = Vec::Constant(3, 0.2), pp = Vec::Constant(2, -0.4);
    CHECK(testutil::rel_err(one.grad_x_smoothed(xx, pp), two.grad_x_smoothed(xx, pp)) < 1e-14);

    for (auto fam : {Family::Quadratic, Family::MaxSquared, Family::Icnn}) {
        auto model = random_model({fam, Family::Icnn, Family::Quadratic}, 3, 2, 77, true, 0.3);
        std::mt19937_64 rng(77);
        for (int t = 0; t < 20; ++t) {
            Vec p = uniform_vec(rng, 2);
            FunctionObjective f(3, [&](const Vec& xv, Vec* gr) {
                if (gr) *gr = model.grad_x_smoothed(xv, p);
                return model.smoothed(xv, p);
            });
            CHECK(gradcheck(f, uniform_vec(rng, 3), 1e-5).max_rel_err <= 1e-5);
        }
    }
}

TEST_CASE("grad_theta_loss: trivial objectives") {
    FunctionObjective half_norm(4, [](const Vec& th, Vec* g) {
        if (g) *g = th;
        return 0.5 * th.squaredNorm();
    });
    Vec th(4);
    th << 1, -2, 3, 0.5;
    CHECK((grad_theta_loss(half_norm, th) - th).norm() == 0.0);

    // one sample, K=1 quadratic whose only nonzero parameter is d
    ComponentSpec s;
    s.family = Family::Quadratic;
    s.n_x = 2;
    ConvexComponent c(s);
    for (auto& net : c.nets()) net.bias(0).setZero();
    c.nets()[2].bias(0)(0, 0) = 0.4;
    SurrogateModel m(2, 0, {c}, {MonotoneHead{}}, false, 0.1);
    Dataset d;
    d.n_x = 2;
    d.samples.push_back({Vec::Constant(2, 0.3), Vec(0), 1.5, {}, {}, false});
    CompositeLoss loss(m, d, {});
    Vec gr = grad_theta_loss(loss, m.gather());
    // parameter order: L net (3), c net (2), d net (1)
    CHECK(gr.size() == 6);
    CHECK(gr(5) == doctest::Approx(-2.0 * (1.5 - 0.4)).epsilon(1e-14));
    CHECK(gr.head(3).norm() == 0.0);  // ∂‖Lx‖² vanishes at L = 0
    CHECK(gr(3) == doctest::Approx(-2.0 * (1.5 - 0.4) * 0.3).epsilon(1e-14));
}

TEST_CASE("composite loss gradient matches differences on 50 coordinates") {
    for (bool heads : {false, true}) {
        auto m = random_model({Family::Quadratic, Family::MaxSquared, Family::Icnn}, 3, 2, 5, heads, 0.2);
        Dataset d = random_dataset(3, 2, 3, 10, 9);
        CompositeLoss loss(m, d, {0.7, 1.3}, jac, 4);
        Vec th = m.gather();
        std::mt19937_64 rng(5);
        std::vector<Eigen::Index> coords;
        std::uniform_int_distribution<Eigen::Index> pick(0, th.size() - 1);
        for (int i = 0; i < 50; ++i) coords.push_back(pick(rng));
        auto rep = gradcheck(loss, th, 1e-5, coords);
        CAPTURE(heads);
        CHECK(rep.max_rel_err <= 1e-4);
    }
}

TEST_CASE("grad_theta_loss is linear in the loss") {
    auto m = random_model({Family::Quadratic, Family::Icnn}, 2, 2, 8, true);
    Dataset d1 = random_dataset(2, 2, 3, 12, 1);
    Dataset d2 = random_dataset(2, 2, 3, 7, 2);
    auto m1 = m, m2 = m;
    CompositeLoss l1(m1, d1, {0.5, 0.5}, jac);
    CompositeLoss l2(m2, d2, {1.0, 0.0}, jac);
    const double a = 2.5;
    FunctionObjective combo(l1.dim(), [&](const Vec& th, Vec* g) {
        Vec g1, g2;
        double v = a * l1.evaluate(th, g ? &g1 : nullptr) + l2.evaluate(th, g ? &g2 : nullptr);
        if (g) *g = a * g1 + g2;
        return v;
    });
    Vec th = m.gather();
    Vec lhs = grad_theta_loss(combo, th);
    Vec rhs = a * grad_theta_loss(l1, th) + grad_theta_loss(l2, th);
    CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("gradients are deterministic and schedule independent") {
    auto m = random_model({Family::MaxSquared, Family::Icnn}, 3, 2, 12, true);
    Dataset d = random_dataset(3, 2, 3, 40, 12);
    CompositeLoss par(m, d, {0.3, 0.6}, jac, 7);
    Vec th = m.gather();
    Vec g1, g2, g3;
    double v1 = par.evaluate(th, &g1);
    double v2 = par.evaluate(th, &g2);
    par.set_parallel(false);
    double v3 = par.evaluate(th, &g3);
    CHECK(std::memcmp(&v1, &v2, sizeof v1) == 0);
    CHECK(std::memcmp(&v1, &v3, sizeof v1) == 0);
    CHECK(std::memcmp(g1.data(), g2.data(), sizeof(double) * static_cast<std::size_t>(g1.size())) == 0);
    CHECK(std::memcmp(g1.data(), g3.data(), sizeof(double) * static_cast<std::size_t>(g1.size())) == 0);
}

TEST_CASE("non-finite loss names the sample") {
    auto m = random_model({Family::Quadratic}, 2, 0, 3, false);
    Dataset d;
    d.n_x = 2;
    d.samples.push_back({Vec::Zero(2), Vec(0), 0.0, {}, {}, false});
    d.samples.push_back({Vec::Constant(2, 1e200), Vec(0), 0.0, {}, {}, false});
    CompositeLoss loss(m, d, {});
    long idx = -2;
    try {
        grad_theta_loss(loss, m.gather());
    } catch (const NonFiniteError& e) {
        idx = e.sample();
    }
    CHECK(idx == 1);
}
