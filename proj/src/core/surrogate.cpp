#include "minsurro/core/surrogate.hpp"

#include <cmath>
#include <limits>

namespace minsurro {

InputMap InputMap::identity(int n_x, int n_p) {
    return {Vec::Ones(n_x), Vec::Zero(n_x), Vec::Ones(n_p), Vec::Zero(n_p)};
}

namespace {

void box_map(const Vec& lo, const Vec& hi, Vec& gain, Vec& shift) {
    require(lo.size() == hi.size(), "InputMap: box bound lengths differ");
    gain.resize(lo.size());
    shift.resize(lo.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
        const double w = hi(i) - lo(i);
        if (w > 0.0) {
            gain(i) = 2.0 / w;
            shift(i) = -(hi(i) + lo(i)) / w;
        } else {
            gain(i) = 1.0;
            shift(i) = -lo(i);
        }
    }
}

} // namespace

InputMap InputMap::from_boxes(const Vec& x_lo, const Vec& x_hi, const Vec& p_lo, const Vec& p_hi) {
    InputMap m;
    box_map(x_lo, x_hi, m.x_gain, m.x_shift);
    box_map(p_lo, p_hi, m.p_gain, m.p_shift);
    return m;
}

double smooth_min(std::span<const double> z, double gamma) {
    require(!z.empty(), "smooth_min: empty input");
    require(gamma > 0.0, "smooth_min: gamma must be positive");
    double m = std::numeric_limits<double>::infinity();
    for (double v : z) m = std::min(m, v);
    double s = 0.0;
    for (double v : z) s += std::exp(-(v - m) / gamma);
    return m - gamma * std::log(s);
}

SurrogateModel::SurrogateModel(int n_x, int n_p, std::vector<ConvexComponent> components,
                               std::vector<MonotoneHead> heads, bool shared_head, double gamma)
    : n_x_(n_x), n_p_(n_p), components_(std::move(components)), heads_(std::move(heads)),
      shared_head_(shared_head), gamma_(gamma), map_(InputMap::identity(n_x, n_p)) {
    require(!components_.empty(), "SurrogateModel: K must be >= 1");
    require(gamma_ > 0.0, "SurrogateModel: gamma must be positive");
    for (const auto& c : components_)
        require(c.spec().n_x == n_x_ && c.spec().n_p == n_p_, "SurrogateModel: component dimension mismatch");
    if (shared_head_)
        require(heads_.size() == 1, "SurrogateModel: shared head expects exactly one head");
    else
        require(heads_.size() == components_.size(), "SurrogateModel: one head per component");
}

void SurrogateModel::set_gamma(double g) {
    require(g > 0.0, "SurrogateModel: gamma must be positive");
    gamma_ = g;
}

void SurrogateModel::set_input_map(InputMap m) {
    require(m.x_gain.size() == n_x_ && m.x_shift.size() == n_x_ && m.p_gain.size() == n_p_ &&
                m.p_shift.size() == n_p_,
            "SurrogateModel: input map dimension mismatch");
    map_ = std::move(m);
}

const MonotoneHead& SurrogateModel::head(int i) const {
    return shared_head_ ? heads_.front() : heads_[static_cast<std::size_t>(i)];
}

MonotoneHead& SurrogateModel::head(int i) {
    return shared_head_ ? heads_.front() : heads_[static_cast<std::size_t>(i)];
}

void SurrogateModel::initialize(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& c : components_) c.initialize(rng);
    for (auto& h : heads_) h.initialize(rng);
}

std::vector<Mat*> SurrogateModel::parameters() {
    std::vector<Mat*> out;
    for (auto& c : components_) c.collect(out);
    for (auto& h : heads_) h.collect(out);
    return out;
}

std::vector<const Mat*> SurrogateModel::parameters() const {
    std::vector<const Mat*> out;
    for (const auto& c : components_) c.collect(out);
    for (const auto& h : heads_) h.collect(out);
    return out;
}

std::size_t SurrogateModel::parameter_count() const {
    std::size_t n = 0;
    for (const Mat* m : parameters()) n += static_cast<std::size_t>(m->size());
    return n;
}

Vec SurrogateModel::gather() const {
    Vec theta(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index off = 0;
    for (const Mat* m : parameters()) {
        theta.segment(off, m->size()) = Eigen::Map<const Vec>(m->data(), m->size());
        off += m->size();
    }
    return theta;
}

void SurrogateModel::scatter(const Vec& theta) {
    const auto expected = static_cast<Eigen::Index>(parameter_count());
    if (theta.size() != expected)
        throw ContractError("SurrogateModel::scatter: theta length " + std::to_string(theta.size()) +
                            ", expected " + std::to_string(expected));
    Eigen::Index off = 0;
    for (Mat* m : parameters()) {
        Eigen::Map<Vec>(m->data(), m->size()) = theta.segment(off, m->size());
        off += m->size();
    }
}

void SurrogateModel::check_dims(const Vec& x, const Vec& p) const {
    if (x.size() != n_x_ || p.size() != n_p_)
        throw ContractError("SurrogateModel: expected x of length " + std::to_string(n_x_) + " and p of length " +
                            std::to_string(n_p_));
}

std::vector<BoundComponent> SurrogateModel::bind(const Vec& p) const {
    require(p.size() == n_p_, "SurrogateModel::bind: parameter dimension mismatch");
    Vec ps = map_.map_p(p);
    std::vector<BoundComponent> out;
    out.reserve(components_.size());
    for (const auto& c : components_) out.emplace_back(c.family(), c.coefficients(ps), map_.x_gain, map_.x_shift);
    return out;
}

Vec SurrogateModel::component_values(const Vec& x, const Vec& p) const {
    check_dims(x, p);
    auto bound = bind(p);
    Vec v(K());
    for (int i = 0; i < K(); ++i) v(i) = bound[static_cast<std::size_t>(i)].value(x);
    return v;
}

Vec SurrogateModel::head_values(const Vec& x, const Vec& p) const {
    Vec f = component_values(x, p);
    for (int i = 0; i < K(); ++i) f(i) = head(i).eval(f(i));
    return f;
}

ExactValue SurrogateModel::exact(const Vec& x, const Vec& p) const {
    Vec h = head_values(x, p);
    ExactValue r;
    r.value = h(0);
    r.index = 0;
    for (int i = 1; i < K(); ++i) {
        if (h(i) < r.value) {
            r.value = h(i);
            r.index = i;
        }
    }
    return r;
}

double SurrogateModel::smoothed(const Vec& x, const Vec& p) const {
    Vec h = head_values(x, p);
    return smooth_min(std::span<const double>(h.data(), static_cast<std::size_t>(h.size())), gamma_);
}

Vec SurrogateModel::grad_x_smoothed(const Vec& x, const Vec& p, Vec* weights) const {
    check_dims(x, p);
    auto bound = bind(p);
    Vec h(K()), dh(K());
    std::vector<Vec> grads(static_cast<std::size_t>(K()));
    for (int i = 0; i < K(); ++i) {
        double f = bound[static_cast<std::size_t>(i)].value_grad(x, grads[static_cast<std::size_t>(i)]);
        double d = 0.0;
        h(i) = head(i).eval(f, d);
        dh(i) = d;
    }
    const double m = h.minCoeff();
    Vec w = (-(h.array() - m) / gamma_).exp().matrix();
    w /= w.sum();
    Vec g = Vec::Zero(n_x_);
    for (int i = 0; i < K(); ++i) g += w(i) * dh(i) * grads[static_cast<std::size_t>(i)];
    if (weights) *weights = w;
    return g;
}

ad::Var SurrogateModel::build_head_values(ParamBinding& bind, ad::Var x, ad::Var p) const {
    require(x.rows() == n_x_ && p.rows() == n_p_ && x.cols() == p.cols(),
            "SurrogateModel::build: input shape mismatch");
    ad::Var xs = ad::row_affine(x, map_.x_gain, map_.x_shift);
    ad::Var ps = ad::row_affine(p, map_.p_gain, map_.p_shift);
    std::vector<ad::Var> rows;
    rows.reserve(components_.size());
    for (int i = 0; i < K(); ++i) {
        ad::Var f = components_[static_cast<std::size_t>(i)].build(bind, xs, ps);
        rows.push_back(head(i).build(bind, f));
    }
    return K() == 1 ? rows.front() : ad::vstack(rows);
}

ad::Var SurrogateModel::build_smoothed(ParamBinding& bind, ad::Var x, ad::Var p) const {
    ad::Var h = build_head_values(bind, x, p);
    if (K() == 1) return h;
    // −γ·lse(−H/γ)
    return ad::scale(ad::lse_rows(ad::scale(h, -1.0 / gamma_)), -gamma_);
}

} // namespace minsurro
