#include "minsurro/train/loss.hpp"

#include "minsurro/parallel.hpp"

#include <cmath>

namespace minsurro {

namespace {

Vec stationarity_target(const Sample& s, const ConstraintJacobian& jacobian) {
    if (!s.dual) throw ContractError("optimality regularizer: sample without dual");
    if (!jacobian) throw ContractError("optimality regularizer: no constraint Jacobian supplied");
    Mat J = jacobian(s.x, s.p);
    if (J.rows() != s.x.size() || J.cols() != s.dual->size())
        throw ContractError("optimality regularizer: constraint Jacobian shape does not match the dual");
    return -(J * *s.dual);
}

void check_finite(double v, long sample, const char* what) {
    if (!std::isfinite(v)) throw NonFiniteError(std::string(what) + " is not finite at sample " + std::to_string(sample), sample);
}

} // namespace

double loss_fit(const SurrogateModel& model, std::span<const Sample> batch) {
    require(!batch.empty(), "loss_fit: empty batch");
    double s = 0.0;
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const double r = batch[k].f - model.smoothed(batch[k].x, batch[k].p);
        check_finite(r, static_cast<long>(k), "prediction");
        s += r * r;
    }
    return s / static_cast<double>(batch.size());
}

double reg_optimality(const SurrogateModel& model, std::span<const Sample> optimal,
                      const ConstraintJacobian& jacobian, double w1) {
    if (w1 == 0.0 || optimal.empty()) return 0.0;
    double s = 0.0;
    for (const auto& smp : optimal) {
        Vec t = stationarity_target(smp, jacobian);
        s += (model.grad_x_smoothed(smp.x, smp.p) - t).squaredNorm();
    }
    return w1 * s / static_cast<double>(optimal.size());
}

double reg_gradmatch(const SurrogateModel& model, std::span<const Sample> grad_samples, double w2) {
    if (w2 == 0.0 || grad_samples.empty()) return 0.0;
    double s = 0.0;
    for (const auto& smp : grad_samples) {
        if (!smp.grad) throw ContractError("gradient-matching regularizer: sample without gradient");
        s += (model.grad_x_smoothed(smp.x, smp.p) - *smp.grad).squaredNorm();
    }
    return w2 * s / static_cast<double>(grad_samples.size());
}

LossParts loss_total(const SurrogateModel& model, const Dataset& data, LossWeights weights,
                     const ConstraintJacobian& jacobian) {
    std::vector<Sample> opt, grd;
    for (const auto& s : data.samples) {
        if (s.dual) opt.push_back(s);
        if (s.grad) grd.push_back(s);
    }
    LossParts r;
    r.fit = loss_fit(model, data.samples);
    r.reg1 = reg_optimality(model, opt, jacobian, weights.w1);
    r.reg2 = reg_gradmatch(model, grd, weights.w2);
    r.total = r.fit + r.reg1 + r.reg2;
    return r;
}

// ---------------------------------------------------------------------------

CompositeLoss::CompositeLoss(SurrogateModel& model, const Dataset& data, LossWeights weights,
                             const ConstraintJacobian& jacobian, Eigen::Index chunk)
    : model_(&model), data_(&data), weights_(weights), chunk_(chunk) {
    require(!data.empty(), "CompositeLoss: empty dataset");
    require(chunk_ >= 1, "CompositeLoss: chunk size must be positive");
    require(weights.w1 >= 0.0 && weights.w2 >= 0.0, "CompositeLoss: weights must be nonnegative");
    require(data.n_x == model.n_x() && data.n_p == model.n_p(), "CompositeLoss: dataset dimensions do not match the model");
    const auto N = static_cast<Eigen::Index>(data.size());
    const int n = data.n_x;
    X_.resize(n, N);
    P_.resize(data.n_p, N);
    F_.resize(N);
    target1_ = Mat::Zero(n, N);
    mask1_ = Mat::Zero(n, N);
    target2_ = Mat::Zero(n, N);
    mask2_ = Mat::Zero(n, N);
    for (Eigen::Index k = 0; k < N; ++k) {
        const Sample& s = data.samples[static_cast<std::size_t>(k)];
        X_.col(k) = s.x;
        P_.col(k) = s.p;
        F_(k) = s.f;
        if (s.dual && weights.w1 > 0.0) {
            target1_.col(k) = stationarity_target(s, jacobian);
            mask1_.col(k).setOnes();
            m1_ += 1.0;
        }
        if (s.grad && weights.w2 > 0.0) {
            target2_.col(k) = *s.grad;
            mask2_.col(k).setOnes();
            m2_ += 1.0;
        }
    }
}

Eigen::Index CompositeLoss::dim() const { return static_cast<Eigen::Index>(model_->parameter_count()); }

double CompositeLoss::evaluate(const Vec& theta, Vec* grad) {
    model_->scatter(theta);
    last_ = parts(grad);
    return last_.total;
}

LossParts CompositeLoss::parts(Vec* grad) const {
    const Eigen::Index N = X_.cols();
    const Eigen::Index chunks = (N + chunk_ - 1) / chunk_;
    std::vector<LossParts> partial(static_cast<std::size_t>(chunks));
    std::vector<Vec> grads(grad ? static_cast<std::size_t>(chunks) : 0);
    parallel_for(
        static_cast<std::size_t>(chunks),
        [&](std::size_t c) {
            const Eigen::Index begin = static_cast<Eigen::Index>(c) * chunk_;
            const Eigen::Index count = std::min(chunk_, N - begin);
            partial[c] = chunk_parts(begin, count, grad ? &grads[c] : nullptr);
        },
        parallel_);
    LossParts r;
    if (grad) grad->setZero(dim());
    for (std::size_t c = 0; c < partial.size(); ++c) {
        r.fit += partial[c].fit;
        r.reg1 += partial[c].reg1;
        r.reg2 += partial[c].reg2;
        if (grad) *grad += grads[c];
    }
    r.total = r.fit + r.reg1 + r.reg2;
    if (!std::isfinite(r.total)) throw NonFiniteError("composite loss is not finite", -1);
    return r;
}

LossParts CompositeLoss::chunk_parts(Eigen::Index begin, Eigen::Index count, Vec* grad) const {
    ad::Tape tape;
    ParamBinding bind(tape);
    auto params = model_->parameters();
    if (grad)
        for (const Mat* m : params) bind.add_leaf(*m);

    const bool need1 = m1_ > 0.0 && mask1_.middleCols(begin, count).any();
    const bool need2 = m2_ > 0.0 && mask2_.middleCols(begin, count).any();
    ad::Var x = tape.leaf(X_.middleCols(begin, count), need1 || need2);
    ad::Var p = tape.constant(P_.middleCols(begin, count));
    ad::Var fhat = model_->build_smoothed(bind, x, p);
    for (Eigen::Index k = 0; k < count; ++k)
        check_finite(fhat.value()(0, k), static_cast<long>(begin + k), "prediction");

    const double N = static_cast<double>(X_.cols());
    ad::Var resid = ad::sub(fhat, tape.constant(F_.segment(begin, count).transpose()));
    ad::Var total = ad::scale(ad::sum_all(ad::square(resid)), 1.0 / N);
    LossParts r;
    r.fit = total.value()(0, 0);

    if (need1 || need2) {
        ad::Var wrt[] = {x};
        auto g = tape.grad(ad::sum_all(fhat), wrt);
        ad::Var G = g[0] ? *g[0] : tape.constant(Mat::Zero(X_.rows(), count));
        for (Eigen::Index k = 0; k < count; ++k)
            if (!G.value().col(k).allFinite())
                throw NonFiniteError("surrogate gradient is not finite at sample " + std::to_string(begin + k), begin + k);
        auto reg = [&](const Mat& target, const Mat& mask, double w, double m) {
            ad::Var d = ad::sub(G, tape.constant(target.middleCols(begin, count)));
            ad::Var sq = ad::mul(ad::square(d), tape.constant(mask.middleCols(begin, count)));
            return ad::scale(ad::sum_all(sq), w / m);
        };
        if (need1) {
            ad::Var r1 = reg(target1_, mask1_, weights_.w1, m1_);
            r.reg1 = r1.value()(0, 0);
            total = ad::add(total, r1);
        }
        if (need2) {
            ad::Var r2 = reg(target2_, mask2_, weights_.w2, m2_);
            r.reg2 = r2.value()(0, 0);
            total = ad::add(total, r2);
        }
    }
    r.total = total.value()(0, 0);

    if (grad) {
        std::vector<ad::Var> leaves;
        leaves.reserve(params.size());
        for (const Mat* m : params) leaves.push_back(bind(*m));
        auto gs = tape.grad(total, leaves);
        grad->setZero(dim());
        Eigen::Index off = 0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const Eigen::Index sz = params[i]->size();
            if (gs[i]) grad->segment(off, sz) = Eigen::Map<const Vec>(gs[i]->value().data(), sz);
            off += sz;
        }
    }
    return r;
}

} // namespace minsurro
