#include "minsurro/core/component.hpp"

#include <cmath>

namespace minsurro {

std::string to_string(Family f) {
    switch (f) {
    case Family::Quadratic: return "quadratic";
    case Family::MaxAffine: return "max_affine";
    case Family::MaxSquared: return "max_squared";
    case Family::Icnn: return "icnn";
    }
    return "quadratic";
}

Family family_from_string(const std::string& s) {
    if (s == "quadratic") return Family::Quadratic;
    if (s == "max_affine") return Family::MaxAffine;
    if (s == "max_squared") return Family::MaxSquared;
    if (s == "icnn") return Family::Icnn;
    throw DataError("unknown component family '" + s + "'");
}

int ComponentSpec::encoder_width() const {
    return static_cast<int>(std::lround(0.5 * static_cast<double>(n_p + context_dim)));
}

// ---------------------------------------------------------------------------
// Direct evaluators

double eval_quadratic(const QuadraticCoeffs& q, const Vec& xs, Vec* grad) {
    require(q.lower.rows() == xs.size() && q.linear.size() == xs.size(),
            "eval_quadratic: dimension mismatch");
    Vec lx = q.lower.triangularView<Eigen::Lower>() * xs;
    double v = q.alpha * xs.squaredNorm() + lx.squaredNorm() + q.linear.dot(xs) + q.offset;
    if (grad) {
        Vec ltlx = q.lower.triangularView<Eigen::Lower>().transpose() * lx;
        *grad = 2.0 * q.alpha * xs + 2.0 * ltlx + q.linear;
    }
    return v;
}

double eval_piecewise(const PiecewiseCoeffs& q, const Vec& xs, Vec* grad) {
    require(q.slopes.rows() >= 1, "piecewise component needs at least one piece");
    require(q.slopes.cols() == xs.size() && q.intercepts.size() == q.slopes.rows(),
            "piecewise component: dimension mismatch");
    if (!q.squared) {
        Vec v = q.slopes * xs + q.intercepts;
        Eigen::Index arg = 0;
        double m = v.maxCoeff(&arg);  // first maximiser
        if (grad) *grad = q.slopes.row(arg).transpose();
        return m;
    }
    Vec r = q.slopes * xs - q.intercepts;
    double v = 0.0;
    if (grad) grad->setZero(xs.size());
    for (Eigen::Index t = 0; t < r.size(); ++t) {
        if (r(t) > 0.0) {
            v += r(t) * r(t);
            if (grad) *grad += 2.0 * r(t) * q.slopes.row(t).transpose();
        }
    }
    return v;
}

double eval_icnn(const IcnnCoeffs& q, const Vec& xs, Vec* grad) {
    const std::size_t layers = q.wx.size();
    require(layers >= 1, "eval_icnn: empty network");
    require(q.wx[0].cols() == xs.size(), "eval_icnn: dimension mismatch");
    std::vector<Vec> pre(layers);
    std::vector<Vec> act(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        Vec z = q.wx[l] * xs + q.bias[l];
        if (l > 0) z.noalias() += q.wz[l] * act[l - 1];
        pre[l] = z;
        if (l + 1 < layers)
            act[l] = z.unaryExpr([](double v) { return ad::softplus(v); });
        else
            act[l] = z;
    }
    const double out = act.back()(0);
    if (grad) {
        // reverse pass; upstream of the linear output is 1
        Vec up = Vec::Ones(1);
        Vec g = Vec::Zero(xs.size());
        for (std::size_t l = layers; l-- > 0;) {
            Vec dz = up;
            if (l + 1 < layers)
                dz = up.cwiseProduct(pre[l].unaryExpr([](double v) { return ad::sigmoid(v); }));
            g.noalias() += q.wx[l].transpose() * dz;
            if (l > 0) up = q.wz[l].transpose() * dz;
        }
        *grad = g;
    }
    return out;
}

// ---------------------------------------------------------------------------

BoundComponent::BoundComponent(Family family, Payload payload, Vec gain, Vec shift)
    : family_(family), payload_(std::move(payload)), gain_(std::move(gain)), shift_(std::move(shift)) {}

double BoundComponent::value(const Vec& x) const {
    require(x.size() == gain_.size(), "BoundComponent::value: dimension mismatch");
    Vec xs = gain_.cwiseProduct(x) + shift_;
    return std::visit(
        [&](const auto& q) -> double {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, QuadraticCoeffs>) return eval_quadratic(q, xs);
            else if constexpr (std::is_same_v<T, PiecewiseCoeffs>) return eval_piecewise(q, xs);
            else return eval_icnn(q, xs);
        },
        payload_);
}

double BoundComponent::value_grad(const Vec& x, Vec& grad) const {
    require(x.size() == gain_.size(), "BoundComponent::value_grad: dimension mismatch");
    Vec xs = gain_.cwiseProduct(x) + shift_;
    Vec gs;
    double v = std::visit(
        [&](const auto& q) -> double {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, QuadraticCoeffs>) return eval_quadratic(q, xs, &gs);
            else if constexpr (std::is_same_v<T, PiecewiseCoeffs>) return eval_piecewise(q, xs, &gs);
            else return eval_icnn(q, xs, &gs);
        },
        payload_);
    grad = gs.cwiseProduct(gain_);
    return v;
}

std::pair<Mat, Vec> BoundComponent::raw_affine_pieces() const {
    const auto* pw = std::get_if<PiecewiseCoeffs>(&payload_);
    require(pw != nullptr && !pw->squared, "raw_affine_pieces: not a max-affine component");
    Mat s = pw->slopes * gain_.asDiagonal();
    Vec c = pw->slopes * shift_ + pw->intercepts;
    return {s, c};
}

// ---------------------------------------------------------------------------

namespace {

enum IcnnSlot { kWz = 0, kWx = 1, kCtx = 2, kBias = 3 };

Mlp coefficient_net(const ComponentSpec& s, int out_dim) {
    std::vector<Activation> acts(s.coeff_hidden.size(), Activation::Softplus);
    std::vector<int> hidden = s.n_p > 0 ? s.coeff_hidden : std::vector<int>{};
    if (s.n_p == 0) acts.clear();
    return Mlp(s.n_p, hidden, out_dim, acts, Activation::Identity, false);
}

} // namespace

ConvexComponent::ConvexComponent(ComponentSpec spec) : spec_(std::move(spec)) {
    const int n = spec_.n_x;
    require(n >= 1 && spec_.n_p >= 0, "ConvexComponent: invalid dimensions");
    switch (spec_.family) {
    case Family::Quadratic:
        require(spec_.alpha >= 0.0, "Quadratic component: alpha must be >= 0");
        pattern_ = ad::Pattern::lower_triangular(n);
        nets_.push_back(coefficient_net(spec_, n * (n + 1) / 2));
        nets_.push_back(coefficient_net(spec_, n));
        nets_.push_back(coefficient_net(spec_, 1));
        break;
    case Family::MaxAffine:
    case Family::MaxSquared:
        require(spec_.pieces >= 1, "piecewise component needs at least one piece");
        pattern_ = ad::Pattern::dense(spec_.pieces, n);
        nets_.push_back(coefficient_net(spec_, spec_.pieces * n));
        nets_.push_back(coefficient_net(spec_, spec_.pieces));
        break;
    case Family::Icnn: {
        require(!spec_.icnn_hidden.empty(), "Icnn component needs at least one hidden layer");
        require(spec_.context_dim >= 1, "Icnn component: context width must be positive");
        const std::size_t layers = spec_.icnn_hidden.size() + 1;
        std::vector<int> enc_hidden;
        if (spec_.n_p > 0) enc_hidden.assign(static_cast<std::size_t>(spec_.encoder_layers), spec_.encoder_width());
        for (std::size_t l = 0; l < layers; ++l) {
            nets_.emplace_back(spec_.n_p, enc_hidden, spec_.context_dim,
                               std::vector<Activation>(enc_hidden.size(), Activation::Softplus),
                               Activation::Tanh, false);
            const int width = l + 1 < layers ? spec_.icnn_hidden[l] : 1;
            const int prev = l > 0 ? spec_.icnn_hidden[l - 1] : 0;
            icnn_.push_back(Mat::Zero(l > 0 ? width : 0, prev));
            icnn_.push_back(Mat::Zero(width, n));
            icnn_.push_back(Mat::Zero(width, spec_.context_dim));
            icnn_.push_back(Mat::Zero(width, 1));
        }
        break;
    }
    }
}

const Mat& ConvexComponent::icnn_wz_latent(std::size_t l) const { return icnn_[icnn_index(l, kWz)]; }
const Mat& ConvexComponent::icnn_wx(std::size_t l) const { return icnn_[icnn_index(l, kWx)]; }
const Mat& ConvexComponent::icnn_context(std::size_t l) const { return icnn_[icnn_index(l, kCtx)]; }
const Mat& ConvexComponent::icnn_bias(std::size_t l) const { return icnn_[icnn_index(l, kBias)]; }
Mat& ConvexComponent::icnn_wz_latent(std::size_t l) { return icnn_[icnn_index(l, kWz)]; }
Mat& ConvexComponent::icnn_wx(std::size_t l) { return icnn_[icnn_index(l, kWx)]; }
Mat& ConvexComponent::icnn_context(std::size_t l) { return icnn_[icnn_index(l, kCtx)]; }
Mat& ConvexComponent::icnn_bias(std::size_t l) { return icnn_[icnn_index(l, kBias)]; }

void ConvexComponent::initialize(Rng& rng) {
    const double free_range = std::sqrt(6.0 / static_cast<double>(spec_.n_x + 1));
    for (auto& net : nets_) net.initialize(rng, free_range);
    for (std::size_t i = 0; i < icnn_.size(); ++i) {
        Mat& m = icnn_[i];
        if (i % 4 == kBias || m.size() == 0) {
            m.setZero();
            continue;
        }
        double r = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
        std::uniform_real_distribution<double> u(-r, r);
        for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
    }
}

void ConvexComponent::collect(std::vector<Mat*>& out) {
    for (auto& net : nets_) net.collect(out);
    for (auto& m : icnn_) out.push_back(&m);
}

void ConvexComponent::collect(std::vector<const Mat*>& out) const {
    for (const auto& net : nets_) net.collect(out);
    for (const auto& m : icnn_) out.push_back(&m);
}

std::size_t ConvexComponent::parameter_count() const {
    std::size_t n = 0;
    for (const auto& net : nets_) n += net.parameter_count();
    for (const auto& m : icnn_) n += static_cast<std::size_t>(m.size());
    return n;
}

BoundComponent::Payload ConvexComponent::coefficients(const Vec& p) const {
    require(p.size() == spec_.n_p, "ConvexComponent: parameter dimension mismatch");
    const int n = spec_.n_x;
    switch (spec_.family) {
    case Family::Quadratic: {
        QuadraticCoeffs q;
        q.alpha = spec_.alpha;
        Vec lflat = nets_[0].forward(p);
        q.lower = Mat::Zero(n, n);
        for (int e = 0; e < pattern_->entries(); ++e) q.lower(pattern_->row[e], pattern_->col[e]) = lflat(e);
        q.linear = nets_[1].forward(p);
        q.offset = nets_[2].forward(p)(0);
        return q;
    }
    case Family::MaxAffine:
    case Family::MaxSquared: {
        PiecewiseCoeffs q;
        q.squared = spec_.family == Family::MaxSquared;
        Vec aflat = nets_[0].forward(p);
        q.slopes = Mat(spec_.pieces, n);
        for (int e = 0; e < pattern_->entries(); ++e) q.slopes(pattern_->row[e], pattern_->col[e]) = aflat(e);
        q.intercepts = nets_[1].forward(p);
        return q;
    }
    case Family::Icnn: {
        IcnnCoeffs q;
        const std::size_t layers = spec_.icnn_hidden.size() + 1;
        for (std::size_t l = 0; l < layers; ++l) {
            Vec ctx = nets_[l].forward(p);
            if (l > 0)
                q.wz.push_back(icnn_wz_latent(l).unaryExpr([](double v) { return ad::softplus(v); }));
            else
                q.wz.emplace_back();
            q.wx.push_back(icnn_wx(l));
            q.bias.push_back(icnn_bias(l).col(0) + icnn_context(l) * ctx);
        }
        return q;
    }
    }
    throw ContractError("ConvexComponent: unknown family");
}

ad::Var ConvexComponent::build(ParamBinding& bind, ad::Var x, ad::Var p) const {
    const Eigen::Index batch = x.cols();
    require(x.rows() == spec_.n_x && p.rows() == spec_.n_p && p.cols() == batch,
            "ConvexComponent::build: input shape mismatch");
    switch (spec_.family) {
    case Family::Quadratic: {
        ad::Var lflat = nets_[0].forward(bind, p, batch);
        ad::Var lx = ad::pat_mv(pattern_, lflat, x);
        ad::Var v = ad::col_sum(ad::square(lx));
        v = ad::add(v, ad::col_sum(ad::mul(nets_[1].forward(bind, p, batch), x)));
        v = ad::add(v, nets_[2].forward(bind, p, batch));
        if (spec_.alpha > 0.0) v = ad::add(v, ad::scale(ad::col_sum(ad::square(x)), spec_.alpha));
        return v;
    }
    case Family::MaxAffine: {
        ad::Var ax = ad::pat_mv(pattern_, nets_[0].forward(bind, p, batch), x);
        return ad::max_rows(ad::add(ax, nets_[1].forward(bind, p, batch)));
    }
    case Family::MaxSquared: {
        ad::Var ax = ad::pat_mv(pattern_, nets_[0].forward(bind, p, batch), x);
        ad::Var r = ad::relu(ad::sub(ax, nets_[1].forward(bind, p, batch)));
        return ad::col_sum(ad::square(r));
    }
    case Family::Icnn: {
        const std::size_t layers = spec_.icnn_hidden.size() + 1;
        ad::Var z;
        for (std::size_t l = 0; l < layers; ++l) {
            ad::Var ctx = nets_[l].forward(bind, p, batch);
            ad::Var pre = ad::add_bias(
                ad::add(ad::matmul(bind(icnn_wx(l)), x), ad::matmul(bind(icnn_context(l)), ctx)),
                bind(icnn_bias(l)));
            if (l > 0) pre = ad::add(pre, ad::matmul(ad::softplus(bind(icnn_wz_latent(l))), z));
            z = l + 1 < layers ? ad::softplus(pre) : pre;
        }
        return z;
    }
    }
    throw ContractError("ConvexComponent: unknown family");
}

} // namespace minsurro
