#pragma once

#include "minsurro/solve/convex.hpp"
#include "minsurro/train/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <random>

namespace minsurro {

/// Six-hump camel back function.
double camel(double x1, double x2);
Vec camel_grad(const Vec& x);

constexpr double kCamelGlobalValue = -1.031628453489877;

FeasibleRegion camel_domain();

struct CamelConfig {
    std::vector<int> ks{1, 2, 5};
    int pieces = 10;
    int n_samples = 1000;
    std::vector<int> head_hidden{5, 3};
    double gamma = 0.05;
    int adam_epochs = 1000;
    double learning_rate = 1e-3;
    int finetune_iterations = 5000;
    int restarts = 4;
    int multistart = 100;
    int grid_x1 = 201;
    int grid_x2 = 101;
    std::uint64_t seed = 0;
};

struct DescentResult {
    Vec x;
    double f = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
};

/// Gradient descent with Armijo backtracking until ‖∇f‖ <= tol.
DescentResult camel_descent(const Vec& x0, double tol = 1e-6, int max_iters = 10000);

bool is_global(double f);

struct MultistartResult {
    std::vector<Vec> starts;
    std::vector<DescentResult> runs;
    int global_count = 0;
    double global_fraction() const;
};

MultistartResult multistart_baseline(int n_starts, std::mt19937_64& rng);

struct CamelRun {
    int K = 0;
    TrainResult training;
    DecompositionResult solve;
    double camel_at_x_star = 0.0;
    DescentResult refined;
    Mat grid;          // surrogate (exact min) on the level-set grid, x1 along rows
    Vec grid_argmin;   // grid point with the lowest surrogate value
};

struct CamelReport {
    CamelConfig config;
    Dataset data;
    Vec grid_x1, grid_x2;
    std::vector<CamelRun> runs;
    MultistartResult baseline;
};

/// Surrogate for the benchmark: K max-squared components with free
/// coefficients and one shared tanh head.
SurrogateModel camel_model(int K, const CamelConfig& cfg);

Dataset camel_dataset(int n, std::mt19937_64& rng);

CamelReport run_camel(const CamelConfig& cfg);

/// camel_grid_K{K}.csv per run and camel_report.json.
void write_camel_outputs(const CamelReport& report, const std::filesystem::path& dir);

} // namespace minsurro
