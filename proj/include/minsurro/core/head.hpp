#pragma once

#include "minsurro/core/mlp.hpp"

#include <optional>

namespace minsurro {

/// Nondecreasing scalar map applied to a component value: either the
/// identity or a network with softplus-reparameterised (nonnegative) weights,
/// monotone hidden activations and a linear output layer.
class MonotoneHead {
public:
    MonotoneHead() = default;  // identity
    static MonotoneHead identity() { return {}; }
    static MonotoneHead network(std::vector<int> hidden, std::vector<Activation> acts);

    bool is_identity() const { return !net_.has_value(); }
    const Mlp& net() const { return *net_; }
    Mlp& net() { return *net_; }

    double eval(double t) const;
    /// Value and dh/dt.
    double eval(double t, double& deriv) const;
    ad::Var build(ParamBinding& bind, ad::Var t) const;  // 1 x B -> 1 x B

    void initialize(Rng& rng);
    void collect(std::vector<Mat*>& out);
    void collect(std::vector<const Mat*>& out) const;
    std::size_t parameter_count() const;

private:
    std::optional<Mlp> net_;
};

} // namespace minsurro
