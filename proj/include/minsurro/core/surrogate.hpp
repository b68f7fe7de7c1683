#pragma once

#include "minsurro/core/component.hpp"
#include "minsurro/core/head.hpp"
#include "minsurro/core/region.hpp"

#include <span>

namespace minsurro {

/// Affine standardisation v_s = gain .* v + shift applied before any network.
struct InputMap {
    Vec x_gain, x_shift;
    Vec p_gain, p_shift;

    static InputMap identity(int n_x, int n_p);
    /// Maps each box onto [-1, 1]^n; degenerate (zero-width) coordinates keep gain 1.
    static InputMap from_boxes(const Vec& x_lo, const Vec& x_hi, const Vec& p_lo, const Vec& p_hi);

    Vec map_x(const Vec& x) const { return x_gain.cwiseProduct(x) + x_shift; }
    Vec map_p(const Vec& p) const { return p_gain.cwiseProduct(p) + p_shift; }
};

struct ExactValue {
    double value = 0.0;
    int index = 0;
};

/// −γ·log Σ exp(−z_i/γ), evaluated with the max shift.
double smooth_min(std::span<const double> z, double gamma);

/// Pointwise minimum of K head-transformed convex components.
class SurrogateModel {
public:
    SurrogateModel() = default;
    SurrogateModel(int n_x, int n_p, std::vector<ConvexComponent> components,
                   std::vector<MonotoneHead> heads, bool shared_head, double gamma);

    int n_x() const { return n_x_; }
    int n_p() const { return n_p_; }
    int K() const { return static_cast<int>(components_.size()); }
    double gamma() const { return gamma_; }
    void set_gamma(double g);
    bool shared_head() const { return shared_head_; }

    const InputMap& input_map() const { return map_; }
    void set_input_map(InputMap m);

    ConvexComponent& component(int i) { return components_[static_cast<std::size_t>(i)]; }
    const ConvexComponent& component(int i) const { return components_[static_cast<std::size_t>(i)]; }
    const MonotoneHead& head(int i) const;
    MonotoneHead& head(int i);
    std::vector<MonotoneHead>& heads() { return heads_; }
    const std::vector<MonotoneHead>& heads() const { return heads_; }

    /// Draw fresh parameters from `seed`.
    void initialize(std::uint64_t seed);

    // Flat parameter vector Θ: components in order, then heads.
    std::vector<Mat*> parameters();
    std::vector<const Mat*> parameters() const;
    std::size_t parameter_count() const;
    Vec gather() const;
    void scatter(const Vec& theta);

    /// Components evaluated at raw parameter p.
    std::vector<BoundComponent> bind(const Vec& p) const;

    /// F(x, p) = (f̄_1, ..., f̄_K) before heads.
    Vec component_values(const Vec& x, const Vec& p) const;
    /// (h_i(f̄_i(x, p)))_i.
    Vec head_values(const Vec& x, const Vec& p) const;

    ExactValue exact(const Vec& x, const Vec& p) const;
    double smoothed(const Vec& x, const Vec& p) const;

    /// ∇_x of the smoothed surrogate. When `weights` is given it receives the
    /// softmin weights w = softmax(−H/γ) over head values H.
    Vec grad_x_smoothed(const Vec& x, const Vec& p, Vec* weights = nullptr) const;

    /// Batched smoothed surrogate on raw inputs: x (n_x x B), p (n_p x B) -> 1 x B.
    ad::Var build_smoothed(ParamBinding& bind, ad::Var x, ad::Var p) const;
    /// Batched head values, K x B.
    ad::Var build_head_values(ParamBinding& bind, ad::Var x, ad::Var p) const;

private:
    int n_x_ = 0;
    int n_p_ = 0;
    std::vector<ConvexComponent> components_;
    std::vector<MonotoneHead> heads_;
    bool shared_head_ = false;
    double gamma_ = 0.1;
    InputMap map_;

    void check_dims(const Vec& x, const Vec& p) const;
};

} // namespace minsurro
