#pragma once

#include "minsurro/core/region.hpp"
#include "minsurro/core/surrogate.hpp"

#include <functional>

namespace minsurro {

struct SolverOptions {
    double tol = 1e-8;             // projected-gradient stationarity, ∞-norm
    double max_affine_tol = 1e-6;  // relaxed tolerance for polyhedral components
    int max_iters = 5000;
    bool parallel = true;
};

enum class SolveStatus { Optimal, IterLimit, Infeasible };
std::string to_string(SolveStatus s);

struct SubproblemSolution {
    Vec x_opt;
    double value = 0.0;
    int iterations = 0;
    SolveStatus status = SolveStatus::Infeasible;
    double kkt_residual = 0.0;
};

struct DecompositionResult {
    std::vector<SubproblemSolution> per_component;
    int winner = -1;
    Vec x_star;
    double value_star = 0.0;
    SolveStatus status = SolveStatus::Infeasible;
};

/// true iff the box and every row hold within tol.
bool check_feasibility(const FeasibleRegion& region, const Vec& x, double tol);

/// Euclidean projection onto box ∩ rows. Box-only regions are clamped;
/// otherwise Dykstra's alternating projections are used, with an exact QP
/// when they stall. Returns false if the region is empty.
bool project(const FeasibleRegion& region, const Vec& y, Vec& out);

/// ‖x − Π(x − g)‖∞.
double projected_gradient_residual(const FeasibleRegion& region, const Vec& x, const Vec& g);

/// Smooth convex objective with gradient: f(x, grad) -> value.
using SmoothFn = std::function<double(const Vec&, Vec&)>;

/// Projected gradient with Barzilai–Borwein steps and Armijo backtracking,
/// finished by projected Newton steps on a difference Hessian.
SubproblemSolution minimize_smooth(const SmoothFn& f, const FeasibleRegion& region, const SolverOptions& opts,
                                   const Vec* start = nullptr);

/// min over the region of one bound component.
SubproblemSolution solve_subproblem(const BoundComponent& component, const FeasibleRegion& region,
                                    const SolverOptions& opts = {}, const Vec* start = nullptr);

/// Solves all K subproblems at parameter p, then selects the component with
/// the smallest head-transformed optimal value (lowest index on ties).
DecompositionResult decompose_solve(const SurrogateModel& model, const Vec& p, const FeasibleRegion& region,
                                    const SolverOptions& opts = {});

} // namespace minsurro
