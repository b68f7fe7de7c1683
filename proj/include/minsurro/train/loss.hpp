#pragma once

#include "minsurro/core/surrogate.hpp"
#include "minsurro/diff/objective.hpp"
#include "minsurro/train/dataset.hpp"

#include <span>

namespace minsurro {

struct LossWeights {
    double w1 = 0.0;  // optimality regularizer
    double w2 = 0.0;  // gradient matching
};

struct LossParts {
    double total = 0.0;
    double fit = 0.0;
    double reg1 = 0.0;
    double reg2 = 0.0;
};

// Reference implementations on the direct evaluation path, one sample at a time.

/// Mean squared error of the smoothed surrogate.
double loss_fit(const SurrogateModel& model, std::span<const Sample> batch);
/// (w1/M1) Σ ‖∇_x f̂ + ∇_x g λ‖² over samples carrying duals.
double reg_optimality(const SurrogateModel& model, std::span<const Sample> optimal,
                      const ConstraintJacobian& jacobian, double w1);
/// (w2/M2) Σ ‖∇_x f̂ − ∇_x f‖² over samples carrying gradients.
double reg_gradmatch(const SurrogateModel& model, std::span<const Sample> grad_samples, double w2);
/// Sum of the three terms over the matching subsets of `data`.
LossParts loss_total(const SurrogateModel& model, const Dataset& data, LossWeights weights,
                     const ConstraintJacobian& jacobian = {});

/// Composite loss as a function of Θ, evaluated on tapes over fixed column
/// chunks. Chunks may run in parallel; partial results are summed in chunk
/// order so the value does not depend on the schedule.
class CompositeLoss final : public Objective {
public:
    CompositeLoss(SurrogateModel& model, const Dataset& data, LossWeights weights,
                  const ConstraintJacobian& jacobian = {}, Eigen::Index chunk = 512);

    Eigen::Index dim() const override;
    double evaluate(const Vec& theta, Vec* grad) override;

    /// Loss parts at the model's current parameters.
    LossParts parts(Vec* grad = nullptr) const;
    const LossParts& last() const { return last_; }

    void set_parallel(bool on) { parallel_ = on; }

private:
    SurrogateModel* model_;
    const Dataset* data_;
    LossWeights weights_;
    Eigen::Index chunk_;
    bool parallel_ = true;
    LossParts last_;
    // Per-sample regularizer targets and column masks, n_x x N.
    Mat target1_, mask1_, target2_, mask2_;
    Mat X_, P_;
    Vec F_;
    double m1_ = 0.0, m2_ = 0.0;

    LossParts chunk_parts(Eigen::Index begin, Eigen::Index count, Vec* grad) const;
};

} // namespace minsurro
