#include "minsurro/bench/camel.hpp"

#include "minsurro/io/format.hpp"
#include "minsurro/parallel.hpp"
#include "minsurro/train/sampling.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>

namespace minsurro {

double camel(double x1, double x2) {
    const double a = x1 * x1;
    return (4.0 - 2.1 * a + a * a / 3.0) * a + x1 * x2 + (4.0 * x2 * x2 - 4.0) * x2 * x2;
}

Vec camel_grad(const Vec& x) {
    const double x1 = x(0), x2 = x(1);
    Vec g(2);
    g(0) = 8.0 * x1 - 8.4 * x1 * x1 * x1 + 2.0 * std::pow(x1, 5) + x2;
    g(1) = x1 - 8.0 * x2 + 16.0 * x2 * x2 * x2;
    return g;
}

FeasibleRegion camel_domain() {
    Vec lo(2), hi(2);
    lo << -2.0, -1.0;
    hi << 2.0, 1.0;
    return FeasibleRegion(lo, hi);
}

DescentResult camel_descent(const Vec& x0, double tol, int max_iters) {
    DescentResult r;
    Vec x = x0;
    double f = camel(x(0), x(1));
    Vec g = camel_grad(x);
    int k = 0;
    for (; k < max_iters && g.norm() > tol; ++k) {
        double t = 1.0;
        Vec xn;
        double fn = f;
        for (int bt = 0; bt < 60; ++bt, t *= 0.5) {
            xn = x - t * g;
            fn = camel(xn(0), xn(1));
            if (fn <= f - 1e-4 * t * g.squaredNorm()) break;
        }
        if (!(fn < f)) break;
        x = xn;
        f = fn;
        g = camel_grad(x);
    }
    r.x = x;
    r.f = f;
    r.grad_norm = g.norm();
    r.iterations = k;
    return r;
}

bool is_global(double f) { return f <= -1.0316 + 1e-3; }

double MultistartResult::global_fraction() const {
    return runs.empty() ? 0.0 : static_cast<double>(global_count) / static_cast<double>(runs.size());
}

MultistartResult multistart_baseline(int n_starts, std::mt19937_64& rng) {
    MultistartResult out;
    auto starts = projected_sample(camel_domain(), Vec::Zero(2), static_cast<std::size_t>(n_starts), rng);
    out.starts = starts;
    out.runs.resize(starts.size());
    parallel_for(starts.size(), [&](std::size_t i) { out.runs[i] = camel_descent(starts[i]); });
    for (const auto& r : out.runs) out.global_count += is_global(r.f) ? 1 : 0;
    return out;
}

SurrogateModel camel_model(int K, const CamelConfig& cfg) {
    require(K >= 1, "camel_model: K must be >= 1");
    ComponentSpec s;
    s.family = Family::MaxSquared;
    s.n_x = 2;
    s.n_p = 0;
    s.pieces = cfg.pieces;
    std::vector<ConvexComponent> comps(static_cast<std::size_t>(K), ConvexComponent(s));
    std::vector<Activation> acts(cfg.head_hidden.size(), Activation::Tanh);
    std::vector<MonotoneHead> heads{MonotoneHead::network(cfg.head_hidden, acts)};
    SurrogateModel m(2, 0, std::move(comps), std::move(heads), true, cfg.gamma);
    auto dom = camel_domain();
    m.set_input_map(InputMap::from_boxes(dom.lower, dom.upper, Vec(0), Vec(0)));
    return m;
}

Dataset camel_dataset(int n, std::mt19937_64& rng) {
    Dataset d;
    d.n_x = 2;
    d.n_p = 0;
    for (const auto& x : projected_sample(camel_domain(), Vec::Zero(2), static_cast<std::size_t>(n), rng))
        d.samples.push_back({x, Vec(0), camel(x(0), x(1)), {}, {}, false});
    return d;
}

CamelReport run_camel(const CamelConfig& cfg) {
    require(!cfg.ks.empty(), "run_camel: no K values");
    require(cfg.grid_x1 >= 2 && cfg.grid_x2 >= 2, "run_camel: grid needs at least 2 points per axis");
    CamelReport rep;
    rep.config = cfg;
    std::mt19937_64 data_rng(cfg.seed);
    rep.data = camel_dataset(cfg.n_samples, data_rng);
    const auto dom = camel_domain();
    rep.grid_x1 = Vec::LinSpaced(cfg.grid_x1, dom.lower(0), dom.upper(0));
    rep.grid_x2 = Vec::LinSpaced(cfg.grid_x2, dom.lower(1), dom.upper(1));

    for (int K : cfg.ks) {
        CamelRun run;
        run.K = K;
        TrainConfig tc;
        tc.gamma = cfg.gamma;
        tc.adam.epochs = cfg.adam_epochs;
        tc.adam.learning_rate = cfg.learning_rate;
        tc.finetune.enabled = cfg.finetune_iterations > 0;
        tc.finetune.iterations = cfg.finetune_iterations;
        tc.restarts = cfg.restarts;
        tc.seed = cfg.seed * 1000003ULL + static_cast<std::uint64_t>(K) * 1000ULL;
        tc.selection = Selection::TrainR2;
        run.training = train(camel_model(K, cfg), rep.data, tc);
        const SurrogateModel& model = run.training.model;

        run.solve = decompose_solve(model, Vec(0), dom);
        if (run.solve.winner >= 0) {
            run.camel_at_x_star = camel(run.solve.x_star(0), run.solve.x_star(1));
            run.refined = camel_descent(run.solve.x_star);
        }

        run.grid.resize(cfg.grid_x1, cfg.grid_x2);
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < cfg.grid_x1; ++i)
            for (int j = 0; j < cfg.grid_x2; ++j) {
                Vec x(2);
                x << rep.grid_x1(i), rep.grid_x2(j);
                const double v = model.exact(x, Vec(0)).value;
                run.grid(i, j) = v;
                if (v < best) {
                    best = v;
                    run.grid_argmin = x;
                }
            }
        rep.runs.push_back(std::move(run));
    }
    std::mt19937_64 ms_rng(cfg.seed + 1);
    rep.baseline = multistart_baseline(cfg.multistart, ms_rng);
    return rep;
}

namespace {

nlohmann::ordered_json vec_json(const Vec& v) {
    auto a = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

} // namespace

void write_camel_outputs(const CamelReport& rep, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& run : rep.runs) {
        std::ofstream out(dir / ("camel_grid_K" + std::to_string(run.K) + ".csv"));
        if (!out) throw std::runtime_error("cannot write grid file in " + dir.string());
        out << "x1,x2,f_true,f_surrogate\n";
        for (Eigen::Index i = 0; i < rep.grid_x1.size(); ++i)
            for (Eigen::Index j = 0; j < rep.grid_x2.size(); ++j) {
                const double x1 = rep.grid_x1(i), x2 = rep.grid_x2(j);
                out << format_double(x1) << ',' << format_double(x2) << ',' << format_double(camel(x1, x2)) << ','
                    << format_double(run.grid(i, j)) << '\n';
            }
    }
    nlohmann::ordered_json j;
    j["seed"] = rep.config.seed;
    j["n_samples"] = rep.config.n_samples;
    j["pieces"] = rep.config.pieces;
    j["gamma"] = rep.config.gamma;
    j["restarts"] = rep.config.restarts;
    auto runs = nlohmann::ordered_json::array();
    for (const auto& run : rep.runs) {
        nlohmann::ordered_json r;
        r["K"] = run.K;
        const auto& best = run.training.best_record();
        r["train_mse"] = best.mse;
        r["train_r2"] = best.r2;
        r["best_restart"] = run.training.best;
        auto rs = nlohmann::ordered_json::array();
        for (const auto& rr : run.training.restarts) {
            nlohmann::ordered_json e;
            e["restart"] = rr.restart;
            e["failed"] = rr.failed;
            e["train_mse"] = rr.mse;
            e["train_r2"] = rr.r2;
            rs.push_back(e);
        }
        r["restarts"] = rs;
        r["solve_status"] = to_string(run.solve.status);
        r["winner"] = run.solve.winner;
        r["x_star"] = vec_json(run.solve.x_star);
        r["surrogate_value"] = run.solve.value_star;
        r["camel_at_x_star"] = run.camel_at_x_star;
        r["refined"] = vec_json(run.refined.x);
        r["refined_value"] = run.refined.f;
        r["refined_grad_norm"] = run.refined.grad_norm;
        r["descent_iterations"] = run.refined.iterations;
        r["refined_global"] = is_global(run.refined.f);
        r["grid_argmin"] = vec_json(run.grid_argmin);
        runs.push_back(r);
    }
    j["runs"] = runs;
    nlohmann::ordered_json ms;
    ms["starts"] = rep.baseline.runs.size();
    ms["global"] = rep.baseline.global_count;
    ms["global_fraction"] = rep.baseline.global_fraction();
    int total_iters = 0;
    for (const auto& r : rep.baseline.runs) total_iters += r.iterations;
    ms["mean_iterations"] = rep.baseline.runs.empty() ? 0.0 : double(total_iters) / double(rep.baseline.runs.size());
    j["multistart"] = ms;
    std::ofstream out(dir / "camel_report.json");
    if (!out) throw std::runtime_error("cannot write camel_report.json in " + dir.string());
    out << j.dump(2) << '\n';
}

} // namespace minsurro
