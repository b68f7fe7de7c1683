#pragma once

#include "minsurro/train/loss.hpp"
#include "minsurro/train/optim.hpp"

#include <cstdint>
#include <string>

namespace minsurro {

enum class Selection { TrainR2, TrainMse };

struct FinetuneOptions {
    bool enabled = true;
    int iterations = 5000;
    int memory = 10;
};

struct TrainConfig {
    LossWeights weights;
    double gamma = 0.1;
    AdamOptions adam;
    int batch = 0;  // only full batch (0) is supported
    FinetuneOptions finetune;
    int restarts = 1;
    std::uint64_t seed = 0;
    Selection selection = Selection::TrainR2;
    Eigen::Index chunk = 512;

    void validate() const;
};

struct HistoryRow {
    int epoch = 0;
    LossParts loss;
};

struct RestartRecord {
    int restart = 0;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    double r2 = 0.0;
    double mse = 0.0;
    LossParts final_loss;
    std::vector<HistoryRow> history;
};

struct TrainResult {
    SurrogateModel model;
    int best = 0;
    std::vector<RestartRecord> restarts;

    const RestartRecord& best_record() const { return restarts[static_cast<std::size_t>(best)]; }
};

/// 1 − SSE/SST. A constant target gives 1 for an exact fit and 0 otherwise.
double r2_score(const Vec& truth, const Vec& pred);

/// Smoothed-surrogate predictions on every sample.
Vec predict(const SurrogateModel& model, const Dataset& data);

/// Runs cfg.restarts independent fits of `prototype` (structure and input map
/// are kept, parameters re-drawn from seed + r) and returns the best one.
TrainResult train(const SurrogateModel& prototype, const Dataset& data, const TrainConfig& cfg,
                  const ConstraintJacobian& jacobian = {});

} // namespace minsurro
