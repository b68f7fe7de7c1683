#pragma once

#include "minsurro/ad/tape.hpp"
#include "minsurro/common.hpp"

#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace minsurro {

using Rng = std::mt19937_64;

enum class Activation { Identity, Softplus, Tanh, Sigmoid, Relu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

double activate(Activation a, double x);
/// Derivative of the activation evaluated at the pre-activation x.
double activate_deriv(Activation a, double x);
ad::Var activate(Activation a, ad::Var x);

/// Maps parameter matrices to tape leaves for one tape. Parameters that were
/// never registered are placed on the tape as constants on first use.
class ParamBinding {
public:
    explicit ParamBinding(ad::Tape& tape) : tape_(&tape) {}
    void add_leaf(const Mat& param);
    ad::Var operator()(const Mat& param);
    ad::Tape& tape() const { return *tape_; }

private:
    ad::Tape* tape_;
    std::unordered_map<const Mat*, ad::Var> leaves_;
};

/// Fully connected network. Hidden layers use per-layer activations, the last
/// layer uses `output_act`. With `nonnegative` set, every weight matrix is the
/// softplus of a latent matrix (biases stay free).
class Mlp {
public:
    Mlp() = default;
    Mlp(int in_dim, std::vector<int> hidden, int out_dim, std::vector<Activation> hidden_act,
        Activation output_act, bool nonnegative = false);

    int in_dim() const { return in_dim_; }
    int out_dim() const { return out_dim_; }
    const std::vector<int>& hidden() const { return hidden_; }
    const std::vector<Activation>& hidden_activations() const { return hidden_act_; }
    Activation output_activation() const { return output_act_; }
    bool nonnegative() const { return nonnegative_; }
    std::size_t layer_count() const { return weights_.size(); }

    /// Latent (stored) parameters.
    Mat& weight(std::size_t l) { return weights_[l]; }
    const Mat& weight(std::size_t l) const { return weights_[l]; }
    Mat& bias(std::size_t l) { return biases_[l]; }
    const Mat& bias(std::size_t l) const { return biases_[l]; }

    /// Weight actually applied (softplus of the latent when nonnegative).
    Mat effective_weight(std::size_t l) const;

    void collect(std::vector<Mat*>& out);
    void collect(std::vector<const Mat*>& out) const;
    std::size_t parameter_count() const;

    /// Glorot-uniform weights, zero biases. A network without inputs and
    /// without hidden layers is just a free vector; its output bias is then
    /// drawn uniformly from [-free_range, free_range] instead.
    void initialize(Rng& rng, double free_range);

    Vec forward(const Vec& in) const;
    /// Batched forward on the tape, input in_dim x B.
    ad::Var forward(ParamBinding& bind, ad::Var in, Eigen::Index batch) const;

private:
    int in_dim_ = 0;
    int out_dim_ = 0;
    std::vector<int> hidden_;
    std::vector<Activation> hidden_act_;
    Activation output_act_ = Activation::Identity;
    bool nonnegative_ = false;
    std::vector<Mat> weights_;
    std::vector<Mat> biases_;
};

} // namespace minsurro
