#pragma once

#include "minsurro/common.hpp"

#include <functional>
#include <span>

namespace minsurro {

/// Scalar function of a flat vector with an exact gradient.
class Objective {
public:
    virtual ~Objective() = default;
    virtual Eigen::Index dim() const = 0;
    /// Returns the value; fills `grad` when non-null.
    virtual double evaluate(const Vec& theta, Vec* grad) = 0;
};

class FunctionObjective final : public Objective {
public:
    using Fn = std::function<double(const Vec&, Vec*)>;
    FunctionObjective(Eigen::Index dim, Fn fn) : dim_(dim), fn_(std::move(fn)) {}
    Eigen::Index dim() const override { return dim_; }
    double evaluate(const Vec& theta, Vec* grad) override { return fn_(theta, grad); }

private:
    Eigen::Index dim_;
    Fn fn_;
};

struct GradReport {
    Vec analytic;
    Vec numeric;
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
};

/// Central-difference check of fn's analytic gradient at `point`. With
/// `coords` non-empty only those coordinates are compared.
GradReport gradcheck(Objective& fn, const Vec& point, double h = 1e-5,
                     std::span<const Eigen::Index> coords = {});

/// Exact gradient of `loss` at theta. Throws NonFiniteError on a non-finite
/// value or gradient.
Vec grad_theta_loss(Objective& loss, const Vec& theta);

} // namespace minsurro
