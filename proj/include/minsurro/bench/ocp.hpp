#pragma once

#include "minsurro/solve/convex.hpp"
#include "minsurro/train/trainer.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>

namespace minsurro {

// ---------------------------------------------------------------- path

struct PathPoint {
    double x = 0.0, y = 0.0;
    double heading = 0.0;
    double curvature = 0.0;
};

/// Analytic point of the Lissajous centreline at curve parameter t.
PathPoint lissajous_point(double t);

/// Lissajous centreline with a dense arc-length table over one period.
class LissajousPath {
public:
    static constexpr double A = 1.5, B = 2.0, a = 3.0, b = 2.0;
    static constexpr double delta = 1.5707963267948966;

    explicit LissajousPath(int samples = 20000);

    double length() const { return length_; }
    const Vec& t_table() const { return t_; }
    const Vec& s_table() const { return arc_; }  // cumulative arc length (m)

    /// Curve parameter at normalized arc position s (wrapped into [0, 1)).
    double t_at(double s) const;
    PathPoint at(double s) const;

private:
    Vec t_, arc_;
    double length_ = 0.0;
};

struct FrenetState {
    double s = 0.0;      // normalized arc position
    double d = 0.0;      // lateral offset, left positive
    double theta = 0.0;  // heading error to the tangent
};

struct Pose {
    double x = 0.0, y = 0.0, psi = 0.0;
};

double wrap_angle(double a);  // into (−π, π]

/// Nearest centreline point; with a hint only arc within 1.5 m of it is
/// searched, which keeps the projection on the right branch at crossings.
FrenetState frenet_from_cartesian(const Pose& pose, const LissajousPath& path,
                                  std::optional<double> s_hint = std::nullopt);
Pose cartesian_from_frenet(const FrenetState& f, const LissajousPath& path);

/// Forward-Euler step of the path-frame unicycle kinematics; wraps s.
FrenetState frenet_dynamics_step(const FrenetState& x, double v, double omega, const LissajousPath& path,
                                 double dt);

/// Exact unicycle motion over dt with constant input, integrated in the
/// plane and re-projected near the previous arc position.
FrenetState plant_step(const FrenetState& x, double v, double omega, const LissajousPath& path, double dt);

// ---------------------------------------------------------------- OCP

struct OcpSpec {
    int horizon = 10;  // N_p
    int blocking = 4;  // N_b
    double dt = 0.1;
    double v_max = 1.2;
    double omega_max = 1.0471975511965976;
    double half_width = 0.3;
    double v_ref = 0.72;
    double track_length = 25.68;
    std::array<double, 3> q{0.0, 3.0, 0.1};    // q[0] set from track length
    std::array<double, 3> q_n{0.0, 15.0, 0.5};
    double r = 0.01;

    static OcpSpec standard(double track_length);

    int n_u() const { return 2 * (blocking + 1); }
    int n_p() const { return 3 + horizon + 1; }
    int row_count() const { return 2 * n_u() + 2; }
};

/// p = (s, d, θ, Δψ_0, ..., Δψ_{N_p}).
Vec ocp_parameter(const FrenetState& x, const LissajousPath& path, const OcpSpec& spec);

/// Local-frame rollout state: heading is measured from the tangent at the
/// start of the horizon, the reference heading at step k is Δψ_k.
struct OcpRollout {
    Mat states;     // 3 x (N_p + 1): s, d, heading
    Mat reference;  // 3 x (N_p + 1)
};

OcpRollout ocp_rollout(const Vec& u, const Vec& p, const OcpSpec& spec);

/// min_k (1 − d_k κ_k) along the rollout; the model is singular at 0.
double curvature_margin(const Vec& u, const Vec& p, const OcpSpec& spec);

/// Cost and (optionally) its gradient with respect to the blocked inputs.
double ocp_objective(const Vec& u, const Vec& p, const OcpSpec& spec, Vec* grad = nullptr);

/// Box 𝕌 per blocked input plus two affine rows bounding d after the first
/// step. When the current offset already violates a bound, that row's rhs is
/// relaxed to 0 so u_0 = (0, ·) stays feasible.
FeasibleRegion ocp_constraints(const Vec& p, const OcpSpec& spec);

/// ∇_u g as n_u x m in the stacked row order of FeasibleRegion.
Mat ocp_constraint_jacobian(const Vec& p, const OcpSpec& spec);

/// ‖∇f + ∇g λ‖₂. Throws ContractError on a negative or mis-sized λ.
double stationarity_residual(const Vec& u, const Vec& lambda, const Vec& p, const OcpSpec& spec);

/// Least-squares multipliers on rows active within `active_tol`; negative
/// entries are dropped and the fit repeated.
Vec estimate_duals(const Vec& u, const Vec& p, const OcpSpec& spec, double active_tol = 1e-6);

/// Stationarity residual with estimated duals.
double kkt_residual(const Vec& u, const Vec& p, const OcpSpec& spec);

struct SqpResult {
    Vec u;
    Vec lambda;
    int iterations = 0;
    std::vector<double> residual_history;  // initial point first
    double value = 0.0;
    double residual = 0.0;
};

/// Local SQP on the exact (difference) Hessian with the linear constraints
/// kept in each QP. Stops at residual <= tol or after max_iters steps and
/// returns the iterate with the smallest residual.
SqpResult sqp_refine(const Vec& u_init, const Vec& p, const OcpSpec& spec, int max_iters, double tol = 1e-6);

struct ReferenceSolution {
    bool ok = false;
    Vec u, lambda, grad;
    double value = 0.0;
    double residual = 0.0;
};

/// Multistart SQP; the lowest-cost start meeting the residual tolerance wins.
ReferenceSolution solve_ocp_reference(const Vec& p, const OcpSpec& spec, double tol = 1e-6);

// ---------------------------------------------------------------- data

struct OcpConfig {
    int laps = 100;
    int problems_per_lap = 10;
    int lap_steps = 0;  // 0: one lap at reference speed
    int augment = 300;
    double curvature_margin = 0.2;  // augmented points below this are skipped
    double init_d = 0.2;                            // |d| bound at lap start
    double init_theta = 0.5235987755982988;         // π/6
    double train_perturb_d = 0.02;
    double train_perturb_theta = 0.08726646259971647;  // π/36
    double test_perturb_d = 0.05;
    double test_perturb_theta = 0.1308996938995747;    // π/24
    int sim_steps = 400;

    int K = 2;
    std::vector<int> icnn_hidden{5, 5};
    int context_dim = 5;
    double gamma = 0.1;
    double w1 = 1e-3;
    double w2 = 1e-3;
    int adam_epochs = 1000;
    double learning_rate = 1e-3;
    int finetune_iterations = 2000;
    int restarts = 4;
    std::uint64_t seed = 0;
};

/// Optimal records carry u*, λ*, ∇f(u*); augmented rows carry f and ∇f.
Dataset collect_dataset(const OcpConfig& cfg, const LissajousPath& path, const OcpSpec& spec,
                        std::vector<std::string>* log = nullptr);

/// Surrogate for the benchmark: K ICNN components, identity heads, inputs
/// standardized over 𝕌 and the parameter box seen in `data`.
SurrogateModel ocp_model(const OcpConfig& cfg, const OcpSpec& spec, const Dataset& data);

TrainResult train_ocp(const OcpConfig& cfg, const OcpSpec& spec, const Dataset& data);

// ---------------------------------------------------------------- closed loop

enum class InitMethod { Cold, ShiftedFull, Shifted2, LearnedFull, Learned2 };
std::string to_string(InitMethod m);
InitMethod init_method_from_string(const std::string& s);

struct SimStep {
    Pose pose;
    FrenetState state;
    Vec u;  // applied input (v, ω)
    double residual_guess = 0.0;
    double residual_refined = 0.0;
    int sqp_iterations = 0;
    bool fallback = false;
};

struct SimReport {
    InitMethod method = InitMethod::Cold;
    std::vector<SimStep> steps;
    int fallbacks = 0;
};

/// Runs `cfg.sim_steps` steps from s = 0 on the centreline. Perturbations are
/// drawn from `seed`, so runs with the same seed share them across methods.
SimReport closed_loop_sim(InitMethod method, const OcpConfig& cfg, const LissajousPath& path, const OcpSpec& spec,
                          std::uint64_t seed, const SurrogateModel* model = nullptr);

double median(std::vector<double> v);

/// Largest position gap between two runs over their common steps.
double max_pose_gap(const SimReport& a, const SimReport& b);

/// ocp_sim_{mode}.csv per report and ocp_residuals.json.
void write_sim_outputs(const std::vector<SimReport>& reports, const std::filesystem::path& dir);

} // namespace minsurro
