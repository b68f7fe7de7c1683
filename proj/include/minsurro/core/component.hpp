#pragma once

#include "minsurro/core/mlp.hpp"

#include <variant>

namespace minsurro {

enum class Family { Quadratic, MaxAffine, MaxSquared, Icnn };

std::string to_string(Family f);
Family family_from_string(const std::string& s);

/// Structural description of one convex component.
struct ComponentSpec {
    Family family = Family::Quadratic;
    int n_x = 1;
    int n_p = 0;
    double alpha = 0.0;                 // Quadratic: fixed ||x||^2 weight
    int pieces = 1;                     // MaxAffine / MaxSquared
    std::vector<int> coeff_hidden;      // hidden widths of coefficient nets (p -> coefficients)
    std::vector<int> icnn_hidden{5, 5}; // Icnn hidden widths
    int context_dim = 5;                // Icnn: encoder output width n_q
    int encoder_layers = 2;             // Icnn: hidden layers per encoder

    /// round((n_p + n_q) / 2), half away from zero.
    int encoder_width() const;
};

// Concrete convex functions of the standardized input, with coefficients
// already evaluated at a fixed parameter.

struct QuadraticCoeffs {
    double alpha = 0.0;
    Mat lower;  // n x n lower-triangular factor
    Vec linear;
    double offset = 0.0;
};

struct PiecewiseCoeffs {
    Mat slopes;     // pieces x n
    Vec intercepts; // pieces
    bool squared = false;  // true: sum of squared hinges, false: max-affine
};

struct IcnnCoeffs {
    std::vector<Mat> wz;   // wz[l] for l >= 1 (wz[0] empty), effective (nonnegative)
    std::vector<Mat> wx;   // passthrough weights, one per layer incl. output
    std::vector<Vec> bias; // bias incl. context contribution, one per layer
};

/// A component evaluated at a fixed parameter: a convex function of the raw
/// decision vector x. Holds the standardisation x_s = gain .* x + shift.
class BoundComponent {
public:
    using Payload = std::variant<QuadraticCoeffs, PiecewiseCoeffs, IcnnCoeffs>;

    BoundComponent(Family family, Payload payload, Vec gain, Vec shift);

    Family family() const { return family_; }
    const Payload& payload() const { return payload_; }
    Eigen::Index dim() const { return gain_.size(); }

    double value(const Vec& x) const;
    /// Value and gradient (lowest-index subgradient at max-affine kinks,
    /// zero hinge derivative at exactly zero).
    double value_grad(const Vec& x, Vec& grad) const;

    /// Max-affine only: pieces expressed in raw coordinates, value = max(S x + c).
    std::pair<Mat, Vec> raw_affine_pieces() const;

private:
    Family family_;
    Payload payload_;
    Vec gain_;
    Vec shift_;
};

// Family evaluators on standardized input (exposed for tests).
double eval_quadratic(const QuadraticCoeffs& q, const Vec& xs, Vec* grad = nullptr);
double eval_piecewise(const PiecewiseCoeffs& q, const Vec& xs, Vec* grad = nullptr);
double eval_icnn(const IcnnCoeffs& q, const Vec& xs, Vec* grad = nullptr);

/// One learnable convex component: coefficient networks of p plus, for the
/// ICNN family, the network weights themselves.
class ConvexComponent {
public:
    ConvexComponent() = default;
    explicit ConvexComponent(ComponentSpec spec);

    const ComponentSpec& spec() const { return spec_; }
    Family family() const { return spec_.family; }

    void initialize(Rng& rng);
    void collect(std::vector<Mat*>& out);
    void collect(std::vector<const Mat*>& out) const;
    std::size_t parameter_count() const;

    /// Coefficients at standardized parameter p_s.
    BoundComponent::Payload coefficients(const Vec& p_std) const;

    /// Batched value on standardized inputs: x_std (n_x x B), p_std (n_p x B) -> 1 x B.
    ad::Var build(ParamBinding& bind, ad::Var x_std, ad::Var p_std) const;

    // Access for tests and serialization.
    std::vector<Mlp>& nets() { return nets_; }
    const std::vector<Mlp>& nets() const { return nets_; }
    std::vector<Mat>& icnn_params() { return icnn_; }
    const std::vector<Mat>& icnn_params() const { return icnn_; }

    /// ICNN layer parameter lookup, layer l in [0, hidden.size()].
    const Mat& icnn_wz_latent(std::size_t l) const;
    const Mat& icnn_wx(std::size_t l) const;
    const Mat& icnn_context(std::size_t l) const;
    const Mat& icnn_bias(std::size_t l) const;
    Mat& icnn_wz_latent(std::size_t l);
    Mat& icnn_wx(std::size_t l);
    Mat& icnn_context(std::size_t l);
    Mat& icnn_bias(std::size_t l);

private:
    ComponentSpec spec_;
    std::vector<Mlp> nets_;  // coefficient nets, or encoders for Icnn
    std::vector<Mat> icnn_;  // per layer: [wz_latent, wx, context, bias]
    std::shared_ptr<const ad::Pattern> pattern_;

    std::size_t icnn_index(std::size_t l, int which) const { return 4 * l + static_cast<std::size_t>(which); }
};

} // namespace minsurro
