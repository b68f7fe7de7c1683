#pragma once

#include "minsurro/diff/objective.hpp"

#include <functional>

namespace minsurro {

struct AdamOptions {
    int epochs = 1000;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct LbfgsOptions {
    int iterations = 5000;
    int memory = 10;
    double grad_tol = 1e-10;   // stop when ‖g‖∞ falls below
    double c1 = 1e-4;
    double c2 = 0.9;
    int max_line_search = 30;
};

/// Called once per iteration with the accepted point and its value.
using IterCallback = std::function<void(int iter, const Vec& x, double value)>;

struct OptResult {
    Vec x;
    double value = 0.0;
    int iterations = 0;
};

/// Full-batch Adam. The callback sees θ_t and L(θ_t) before update t.
OptResult adam(Objective& obj, Vec x0, const AdamOptions& opts, const IterCallback& cb = {});

/// Limited-memory BFGS with a strong-Wolfe line search. The returned value
/// never exceeds the value at x0.
OptResult lbfgs(Objective& obj, Vec x0, const LbfgsOptions& opts, const IterCallback& cb = {});

} // namespace minsurro
