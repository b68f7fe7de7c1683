#include "minsurro/core/mlp.hpp"

#include <cmath>

namespace minsurro {

std::string to_string(Activation a) {
    switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Softplus: return "softplus";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Relu: return "relu";
    }
    return "identity";
}

Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::Identity;
    if (s == "softplus") return Activation::Softplus;
    if (s == "tanh") return Activation::Tanh;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "relu") return Activation::Relu;
    throw DataError("unknown activation '" + s + "'");
}

double activate(Activation a, double x) {
    switch (a) {
    case Activation::Identity: return x;
    case Activation::Softplus: return ad::softplus(x);
    case Activation::Tanh: return std::tanh(x);
    case Activation::Sigmoid: return ad::sigmoid(x);
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    }
    return x;
}

double activate_deriv(Activation a, double x) {
    switch (a) {
    case Activation::Identity: return 1.0;
    case Activation::Softplus: return ad::sigmoid(x);
    case Activation::Tanh: {
        double t = std::tanh(x);
        return 1.0 - t * t;
    }
    case Activation::Sigmoid: {
        double s = ad::sigmoid(x);
        return s * (1.0 - s);
    }
    case Activation::Relu: return x > 0.0 ? 1.0 : 0.0;
    }
    return 1.0;
}

ad::Var activate(Activation a, ad::Var x) {
    switch (a) {
    case Activation::Identity: return x;
    case Activation::Softplus: return ad::softplus(x);
    case Activation::Tanh: return ad::tanh(x);
    case Activation::Sigmoid: return ad::sigmoid(x);
    case Activation::Relu: return ad::relu(x);
    }
    return x;
}

void ParamBinding::add_leaf(const Mat& param) {
    leaves_[&param] = tape_->leaf(param, true);
}

ad::Var ParamBinding::operator()(const Mat& param) {
    auto it = leaves_.find(&param);
    if (it != leaves_.end()) return it->second;
    ad::Var c = tape_->constant(param);
    leaves_.emplace(&param, c);
    return c;
}

Mlp::Mlp(int in_dim, std::vector<int> hidden, int out_dim, std::vector<Activation> hidden_act,
         Activation output_act, bool nonnegative)
    : in_dim_(in_dim), out_dim_(out_dim), hidden_(std::move(hidden)),
      hidden_act_(std::move(hidden_act)), output_act_(output_act), nonnegative_(nonnegative) {
    require(in_dim_ >= 0 && out_dim_ >= 1, "Mlp: invalid dimensions");
    if (hidden_act_.size() == 1 && hidden_.size() > 1)
        hidden_act_.assign(hidden_.size(), hidden_act_.front());
    require(hidden_act_.size() == hidden_.size(), "Mlp: one activation per hidden layer");
    int prev = in_dim_;
    for (int w : hidden_) {
        require(w >= 1, "Mlp: hidden width must be positive");
        weights_.push_back(Mat::Zero(w, prev));
        biases_.push_back(Mat::Zero(w, 1));
        prev = w;
    }
    weights_.push_back(Mat::Zero(out_dim_, prev));
    biases_.push_back(Mat::Zero(out_dim_, 1));
}

Mat Mlp::effective_weight(std::size_t l) const {
    if (!nonnegative_) return weights_[l];
    return weights_[l].unaryExpr([](double v) { return ad::softplus(v); });
}

void Mlp::collect(std::vector<Mat*>& out) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.push_back(&weights_[l]);
        out.push_back(&biases_[l]);
    }
}

void Mlp::collect(std::vector<const Mat*>& out) const {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.push_back(&weights_[l]);
        out.push_back(&biases_[l]);
    }
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l)
        n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
    return n;
}

void Mlp::initialize(Rng& rng, double free_range) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        Mat& w = weights_[l];
        double r = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        std::uniform_real_distribution<double> u(-r, r);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
        biases_[l].setZero();
    }
    if (in_dim_ == 0 && hidden_.empty()) {
        std::uniform_real_distribution<double> u(-free_range, free_range);
        Mat& b = biases_.back();
        for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = u(rng);
    }
}

Vec Mlp::forward(const Vec& in) const {
    require(in.size() == in_dim_, "Mlp::forward: input dimension mismatch");
    Vec h = in;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        Vec z = biases_[l].col(0);
        if (h.size() > 0) z.noalias() += effective_weight(l) * h;
        const Activation act = (l + 1 < weights_.size()) ? hidden_act_[l] : output_act_;
        h = z.unaryExpr([act](double v) { return activate(act, v); });
    }
    return h;
}

ad::Var Mlp::forward(ParamBinding& bind, ad::Var in, Eigen::Index batch) const {
    require(in.rows() == in_dim_ && in.cols() == batch, "Mlp::forward: input shape mismatch");
    ad::Var h = in;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        ad::Var b = bind(biases_[l]);
        ad::Var z;
        if (h.rows() == 0) {
            z = ad::broadcast_cols(b, batch);
        } else {
            ad::Var w = bind(weights_[l]);
            if (nonnegative_) w = ad::softplus(w);
            z = ad::add_bias(ad::matmul(w, h), b);
        }
        const Activation act = (l + 1 < weights_.size()) ? hidden_act_[l] : output_act_;
        h = activate(act, z);
    }
    return h;
}

} // namespace minsurro
