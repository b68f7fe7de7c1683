#include "minsurro/train/trainer.hpp"

#include "minsurro/parallel.hpp"

#include <cmath>
#include <array>
#include <cstring>

namespace minsurro {

void TrainConfig::validate() const {
    require(weights.w1 >= 0.0 && weights.w2 >= 0.0, "train: regularizer weights must be nonnegative");
    require(gamma > 0.0, "train: gamma must be positive");
    require(adam.epochs >= 0 && adam.learning_rate > 0.0, "train: invalid Adam settings");
    require(batch == 0, "train: only full-batch training (batch = 0) is supported");
    require(finetune.iterations >= 0 && finetune.memory >= 1, "train: invalid fine-tune settings");
    require(restarts >= 1, "train: restarts must be >= 1");
    require(chunk >= 1, "train: chunk must be positive");
}

double r2_score(const Vec& truth, const Vec& pred) {
    require(truth.size() == pred.size() && truth.size() > 0, "r2_score: size mismatch");
    const double mean = truth.mean();
    const double sse = (truth - pred).squaredNorm();
    const double sst = (truth.array() - mean).square().sum();
    if (sst == 0.0) return sse == 0.0 ? 1.0 : 0.0;
    return 1.0 - sse / sst;
}

Vec predict(const SurrogateModel& model, const Dataset& data) {
    Vec out(static_cast<Eigen::Index>(data.size()));
    parallel_for(data.size(), [&](std::size_t k) {
        out(static_cast<Eigen::Index>(k)) = model.smoothed(data.samples[k].x, data.samples[k].p);
    });
    return out;
}

namespace {

// Remembers the parts of recent evaluations so an optimizer's accepted value
// can be mapped back to its breakdown without re-evaluating.
class RecordingLoss final : public Objective {
public:
    explicit RecordingLoss(CompositeLoss& inner) : inner_(inner) {}
    Eigen::Index dim() const override { return inner_.dim(); }
    double evaluate(const Vec& theta, Vec* grad) override {
        const double v = inner_.evaluate(theta, grad);
        recent_[next_++ % recent_.size()] = inner_.last();
        return v;
    }
    LossParts lookup(double value) const {
        for (const auto& p : recent_)
            if (std::memcmp(&p.total, &value, sizeof(double)) == 0) return p;
        LossParts p;
        p.total = value;
        return p;
    }

private:
    CompositeLoss& inner_;
    std::array<LossParts, 64> recent_{};
    std::size_t next_ = 0;
};

} // namespace

TrainResult train(const SurrogateModel& prototype, const Dataset& data, const TrainConfig& cfg,
                  const ConstraintJacobian& jacobian) {
    cfg.validate();
    require(!data.empty(), "train: empty dataset");
    data.validate();

    const auto R = static_cast<std::size_t>(cfg.restarts);
    std::vector<SurrogateModel> models(R, prototype);
    std::vector<RestartRecord> records(R);
    Vec truth(static_cast<Eigen::Index>(data.size()));
    for (std::size_t k = 0; k < data.size(); ++k) truth(static_cast<Eigen::Index>(k)) = data.samples[k].f;

    parallel_for(R, [&](std::size_t r) {
        RestartRecord& rec = records[r];
        rec.restart = static_cast<int>(r);
        rec.seed = cfg.seed + r;
        SurrogateModel& model = models[r];
        model.set_gamma(cfg.gamma);
        model.initialize(rec.seed);
        try {
            CompositeLoss loss(model, data, cfg.weights, jacobian, cfg.chunk);
            RecordingLoss rl(loss);
            Vec theta = model.gather();
            int epoch = 0;
            if (cfg.adam.epochs > 0) {
                auto res = adam(rl, theta, cfg.adam, [&](int, const Vec&, double v) {
                    rec.history.push_back({epoch++, rl.lookup(v)});
                });
                theta = res.x;
            }
            if (cfg.finetune.enabled && cfg.finetune.iterations > 0) {
                LbfgsOptions lo;
                lo.iterations = cfg.finetune.iterations;
                lo.memory = cfg.finetune.memory;
                auto res = lbfgs(rl, theta, lo, [&](int, const Vec&, double v) {
                    rec.history.push_back({epoch++, rl.lookup(v)});
                });
                theta = res.x;
            }
            model.scatter(theta);
            rec.final_loss = loss.parts();
            Vec pred = predict(model, data);
            if (!pred.allFinite()) throw NonFiniteError("non-finite prediction after training", -1);
            rec.r2 = r2_score(truth, pred);
            rec.mse = (truth - pred).squaredNorm() / static_cast<double>(truth.size());
        } catch (const NonFiniteError& e) {
            rec.failed = true;
            rec.error = e.what();
        }
    });

    int best = -1;
    for (std::size_t r = 0; r < R; ++r) {
        if (records[r].failed) continue;
        if (best < 0) {
            best = static_cast<int>(r);
            continue;
        }
        const auto& b = records[static_cast<std::size_t>(best)];
        const bool better = cfg.selection == Selection::TrainR2 ? records[r].r2 > b.r2 : records[r].mse < b.mse;
        if (better) best = static_cast<int>(r);
    }
    if (best < 0) throw std::runtime_error("train: every restart failed (" + records.front().error + ")");
    TrainResult out{std::move(models[static_cast<std::size_t>(best)]), best, std::move(records)};
    return out;
}

} // namespace minsurro
