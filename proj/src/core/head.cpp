#include "minsurro/core/head.hpp"

namespace minsurro {

MonotoneHead MonotoneHead::network(std::vector<int> hidden, std::vector<Activation> acts) {
    for (Activation a : acts)
        require(a != Activation::Identity, "MonotoneHead: hidden activations must be monotone nonlinearities");
    MonotoneHead h;
    h.net_.emplace(1, std::move(hidden), 1, std::move(acts), Activation::Identity, true);
    return h;
}

double MonotoneHead::eval(double t) const {
    if (!net_) return t;
    Vec in(1);
    in(0) = t;
    return net_->forward(in)(0);
}

double MonotoneHead::eval(double t, double& deriv) const {
    if (!net_) {
        deriv = 1.0;
        return t;
    }
    const Mlp& m = *net_;
    const std::size_t layers = m.layer_count();
    // forward keeping the Jacobian row (input is scalar so dh/dt is a vector per layer)
    Vec h(1);
    h(0) = t;
    Vec dh = Vec::Ones(1);
    for (std::size_t l = 0; l < layers; ++l) {
        Mat w = m.effective_weight(l);
        Vec z = w * h + m.bias(l).col(0);
        Vec dz = w * dh;
        if (l + 1 < layers) {
            const Activation act = m.hidden_activations()[l];
            for (Eigen::Index i = 0; i < z.size(); ++i) {
                dz(i) *= activate_deriv(act, z(i));
                z(i) = activate(act, z(i));
            }
        }
        h = z;
        dh = dz;
    }
    deriv = dh(0);
    return h(0);
}

ad::Var MonotoneHead::build(ParamBinding& bind, ad::Var t) const {
    if (!net_) return t;
    return net_->forward(bind, t, t.cols());
}

void MonotoneHead::initialize(Rng& rng) {
    if (net_) net_->initialize(rng, 1.0);
}

void MonotoneHead::collect(std::vector<Mat*>& out) {
    if (net_) net_->collect(out);
}

void MonotoneHead::collect(std::vector<const Mat*>& out) const {
    if (net_) net_->collect(out);
}

std::size_t MonotoneHead::parameter_count() const { return net_ ? net_->parameter_count() : 0; }

} // namespace minsurro
