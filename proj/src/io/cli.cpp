#include "minsurro/io/cli.hpp"

#include "minsurro/bench/camel.hpp"
#include "minsurro/bench/ocp.hpp"
#include "minsurro/io/dataset_io.hpp"
#include "minsurro/io/format.hpp"
#include "minsurro/io/model_io.hpp"
#include "minsurro/train/sampling.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <functional>
#include <set>

namespace minsurro {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

json parse_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return text;
    }
}

/// Flat key/value settings: config file first, command-line pairs on top.
class Settings {
public:
    Settings(const std::string& config, const std::vector<std::string>& extras) {
        values_ = json::object();
        if (!config.empty()) {
            std::ifstream in(config);
            if (!in) throw std::runtime_error("config file not found: " + config);
            try {
                values_ = json::parse(in);
            } catch (const json::parse_error& e) {
                throw DataError("config file " + config + " is not valid JSON: " + e.what());
            }
            if (!values_.is_object()) throw DataError("config file " + config + " must hold a JSON object");
        }
        for (std::size_t i = 0; i < extras.size(); ++i) {
            std::string key = extras[i];
            if (key.rfind("--", 0) != 0) throw UsageError("unexpected argument '" + key + "'");
            key = key.substr(2);
            std::string value;
            if (const auto eq = key.find('='); eq != std::string::npos) {
                value = key.substr(eq + 1);
                key = key.substr(0, eq);
            } else {
                if (i + 1 >= extras.size()) throw UsageError("option --" + key + " needs a value");
                value = extras[++i];
            }
            values_[key] = parse_value(value);
        }
    }

    void allow(std::initializer_list<const char*> keys) {
        std::set<std::string> known(keys.begin(), keys.end());
        for (auto it = values_.begin(); it != values_.end(); ++it)
            if (!known.count(it.key())) throw UsageError("unknown config key '" + it.key() + "'");
    }

    bool has(const std::string& k) const { return values_.contains(k); }

    double num(const std::string& k, double def) const {
        if (!has(k)) return def;
        const auto& v = values_.at(k);
        if (!v.is_number()) throw UsageError("config key '" + k + "' must be a number");
        return v.get<double>();
    }

    long long integer(const std::string& k, long long def) const {
        if (!has(k)) return def;
        const auto& v = values_.at(k);
        if (!v.is_number_integer()) throw UsageError("config key '" + k + "' must be an integer");
        return v.get<long long>();
    }

    int count(const std::string& k, int def) const {
        const auto v = integer(k, def);
        if (v < 0) throw UsageError("config key '" + k + "' must be nonnegative");
        return static_cast<int>(v);
    }

    std::uint64_t seed() const {
        const auto v = integer("seed", 0);
        if (v < 0) throw UsageError("config key 'seed' must be nonnegative");
        return static_cast<std::uint64_t>(v);
    }

    bool flag(const std::string& k, bool def) const {
        if (!has(k)) return def;
        const auto& v = values_.at(k);
        if (!v.is_boolean()) throw UsageError("config key '" + k + "' must be true or false");
        return v.get<bool>();
    }

    std::string str(const std::string& k, const std::string& def) const {
        if (!has(k)) return def;
        const auto& v = values_.at(k);
        return v.is_string() ? v.get<std::string>() : v.dump();
    }

    std::string required_str(const std::string& k) const {
        if (!has(k)) throw UsageError("missing required setting --" + k);
        return str(k, "");
    }

    /// Accepts a JSON array, a single number or a comma separated list.
    std::vector<double> list(const std::string& k) const {
        const auto& v = values_.at(k);
        std::vector<double> out;
        if (v.is_number()) {
            out.push_back(v.get<double>());
        } else if (v.is_array()) {
            for (const auto& e : v) {
                if (!e.is_number()) throw UsageError("config key '" + k + "' must hold numbers");
                out.push_back(e.get<double>());
            }
        } else if (v.is_string()) {
            std::stringstream ss(v.get<std::string>());
            std::string cell;
            while (std::getline(ss, cell, ',')) {
                const auto e = parse_value(cell);
                if (!e.is_number()) throw UsageError("config key '" + k + "' must hold numbers");
                out.push_back(e.get<double>());
            }
        } else {
            throw UsageError("config key '" + k + "' must be a list of numbers");
        }
        return out;
    }

    std::vector<int> ints(const std::string& k, std::vector<int> def) const {
        if (!has(k)) return def;
        std::vector<int> out;
        for (double d : list(k)) {
            if (d != std::floor(d) || d < 0) throw UsageError("config key '" + k + "' must hold nonnegative integers");
            out.push_back(static_cast<int>(d));
        }
        return out;
    }

    Vec vec(const std::string& k) const {
        if (!has(k)) throw UsageError("missing required setting --" + k);
        const auto l = list(k);
        return Eigen::Map<const Vec>(l.data(), static_cast<Eigen::Index>(l.size()));
    }

    std::vector<std::string> strings(const std::string& k, std::vector<std::string> def) const {
        if (!has(k)) return def;
        const auto& v = values_.at(k);
        std::vector<std::string> out;
        if (v.is_array()) {
            for (const auto& e : v) out.push_back(e.is_string() ? e.get<std::string>() : e.dump());
        } else {
            std::stringstream ss(str(k, ""));
            std::string cell;
            while (std::getline(ss, cell, ',')) out.push_back(cell);
        }
        return out;
    }

    const json& values() const { return values_; }

private:
    json values_;
};

struct Common {
    std::string config;
    std::string out;
    bool force = false;
};

fs::path prepare_out(const Common& c) {
    if (c.out.empty()) throw UsageError("missing --out directory");
    const fs::path dir(c.out);
    if (fs::exists(dir) && !(fs::is_directory(dir) && fs::is_empty(dir)) && !c.force)
        throw std::runtime_error("output directory '" + c.out + "' already exists and is not empty; pass --force");
    fs::create_directories(dir);
    return dir;
}

ojson vec_json(const Vec& v) {
    auto a = ojson::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

FeasibleRegion box_from(const Settings& s, int n_x) {
    const Vec lo = s.vec("x_lower"), hi = s.vec("x_upper");
    if (lo.size() != n_x || hi.size() != n_x) throw UsageError("x_lower/x_upper must have n_x entries");
    return FeasibleRegion(lo, hi);
}

// Box-only regions: ∇g = [I, −I] in the stacked row order.
ConstraintJacobian box_jacobian(const Dataset& data) {
    if (data.m == 0) return {};
    if (data.m != 2 * data.n_x)
        throw UsageError("dataset multipliers need a box-only region (2*n_x rows), found m = " +
                         std::to_string(data.m));
    const int n = data.n_x;
    return [n](const Vec&, const Vec&) {
        Mat j(n, 2 * n);
        j << Mat::Identity(n, n), -Mat::Identity(n, n);
        return j;
    };
}

Selection selection_from(const std::string& s) {
    if (s == "train_r2") return Selection::TrainR2;
    if (s == "train_mse") return Selection::TrainMse;
    throw UsageError("selection must be train_r2 or train_mse");
}

ojson restart_report(const TrainResult& r) {
    ojson j;
    j["best_restart"] = r.best;
    auto rs = ojson::array();
    for (const auto& rr : r.restarts) {
        ojson e;
        e["restart"] = rr.restart;
        e["seed"] = rr.seed;
        e["failed"] = rr.failed;
        if (rr.failed) e["error"] = rr.error;
        e["train_r2"] = rr.r2;
        e["train_mse"] = rr.mse;
        e["loss_total"] = rr.final_loss.total;
        e["loss_fit"] = rr.final_loss.fit;
        e["reg1"] = rr.final_loss.reg1;
        e["reg2"] = rr.final_loss.reg2;
        rs.push_back(e);
    }
    j["restarts"] = rs;
    return j;
}

ojson train_metadata(const Settings& s, const TrainResult& r) {
    ojson m;
    m["seed"] = s.seed();
    m["config_hash"] = format_double(static_cast<double>(fnv1a(s.values().dump()) >> 11));
    m["train_r2"] = r.best_record().r2;
    m["train_mse"] = r.best_record().mse;
    return m;
}

void write_json(const ojson& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------- commands

void cmd_train(const Common& c, const Settings& s, std::ostream& out) {
    const Dataset data = read_dataset(fs::path(s.required_str("data")));
    if (data.empty()) throw DataError("dataset is empty");
    const auto dir = prepare_out(c);

    ComponentSpec spec;
    spec.family = family_from_string(s.str("family", "quadratic"));
    spec.n_x = data.n_x;
    spec.n_p = data.n_p;
    spec.alpha = s.num("alpha", 0.1);
    spec.pieces = s.count("pieces", 4);
    spec.coeff_hidden = s.ints("coeff_hidden", {8});
    spec.icnn_hidden = s.ints("icnn_hidden", {5, 5});
    spec.context_dim = s.count("context_dim", 5);
    spec.encoder_layers = s.count("encoder_layers", 2);
    const int K = s.count("K", 1);
    if (K < 1) throw UsageError("K must be >= 1");
    const bool shared = s.flag("shared_head", true);
    const std::string head = s.str("head", "identity");
    std::vector<MonotoneHead> heads;
    const std::size_t n_heads = shared ? 1 : static_cast<std::size_t>(K);
    for (std::size_t i = 0; i < n_heads; ++i) {
        if (head == "identity") {
            heads.push_back(MonotoneHead::identity());
        } else if (head == "network") {
            const auto hidden = s.ints("head_hidden", {5, 3});
            heads.push_back(MonotoneHead::network(
                hidden, std::vector<Activation>(hidden.size(), activation_from_string(s.str("head_activation", "tanh")))));
        } else {
            throw UsageError("head must be identity or network");
        }
    }
    SurrogateModel proto(data.n_x, data.n_p, std::vector<ConvexComponent>(static_cast<std::size_t>(K), ConvexComponent(spec)),
                         std::move(heads), shared, s.num("gamma", 0.1));

    Vec xlo = data.samples.front().x, xhi = xlo, plo = data.samples.front().p, phi = plo;
    for (const auto& smp : data.samples) {
        xlo = xlo.cwiseMin(smp.x);
        xhi = xhi.cwiseMax(smp.x);
        plo = plo.cwiseMin(smp.p);
        phi = phi.cwiseMax(smp.p);
    }
    if (s.has("x_lower") || s.has("x_upper")) {
        const auto box = box_from(s, data.n_x);
        xlo = box.lower;
        xhi = box.upper;
    }
    proto.set_input_map(InputMap::from_boxes(xlo, xhi, plo, phi));

    TrainConfig tc;
    tc.weights = {s.num("w1", 0.0), s.num("w2", 0.0)};
    tc.gamma = s.num("gamma", 0.1);
    tc.adam.epochs = s.count("epochs", 1000);
    tc.adam.learning_rate = s.num("learning_rate", 1e-3);
    tc.finetune.iterations = s.count("finetune_iterations", 5000);
    tc.finetune.enabled = tc.finetune.iterations > 0;
    tc.restarts = s.count("restarts", 1);
    tc.seed = s.seed();
    tc.selection = selection_from(s.str("selection", "train_r2"));
    const auto result = train(proto, data, tc, box_jacobian(data));

    save_model(result.model, dir / "model.json", train_metadata(s, result));
    write_history(result.best_record().history, dir / "history.csv");
    write_json(restart_report(result), dir / "train_report.json");
    out << "trained K=" << K << " r2=" << format_double(result.best_record().r2)
        << " mse=" << format_double(result.best_record().mse) << '\n';
}

void cmd_solve(const Settings& s, std::ostream& out) {
    const auto model = load_model(fs::path(s.required_str("model")));
    const Vec p = model.n_p() > 0 ? s.vec("p") : Vec(0);
    if (p.size() != model.n_p()) throw UsageError("p must have n_p = " + std::to_string(model.n_p()) + " entries");
    const auto region = box_from(s, model.n_x());
    SolverOptions opts;
    opts.tol = s.num("tol", opts.tol);
    opts.max_iters = s.count("max_iters", opts.max_iters);
    opts.parallel = s.flag("parallel", true);
    const auto r = decompose_solve(model, p, region, opts);
    ojson j;
    j["status"] = to_string(r.status);
    j["winner"] = r.winner;
    j["x_star"] = vec_json(r.x_star);
    j["value_star"] = r.value_star;
    auto comps = ojson::array();
    for (const auto& c : r.per_component) {
        ojson e;
        e["status"] = to_string(c.status);
        e["x_opt"] = vec_json(c.x_opt);
        e["value"] = c.value;
        e["iterations"] = c.iterations;
        e["kkt_residual"] = c.kkt_residual;
        comps.push_back(e);
    }
    j["components"] = comps;
    out << j.dump(2) << '\n';
}

void cmd_sample(const Common& c, const Settings& s, std::ostream& out) {
    const Vec lo = s.vec("x_lower"), hi = s.vec("x_upper");
    if (lo.size() != hi.size()) throw UsageError("x_lower and x_upper differ in length");
    const FeasibleRegion box(lo, hi);
    Vec delta = Vec::Zero(lo.size());
    if (s.has("delta")) {
        const Vec d = s.vec("delta");
        if (d.size() == 1) delta.setConstant(d(0));
        else if (d.size() == lo.size()) delta = d;
        else throw UsageError("delta must be a number or have one entry per coordinate");
    }
    std::mt19937_64 rng(s.seed());
    const auto pts = projected_sample(box, delta, static_cast<std::size_t>(s.count("count", 100)), rng);
    const auto dir = prepare_out(c);
    std::ofstream f(dir / "samples.csv");
    if (!f) throw std::runtime_error("cannot write samples.csv");
    for (Eigen::Index i = 0; i < lo.size(); ++i) f << (i ? "," : "") << 'x' << i;
    f << '\n';
    for (const auto& x : pts) {
        for (Eigen::Index i = 0; i < x.size(); ++i) f << (i ? "," : "") << format_double(x(i));
        f << '\n';
    }
    out << "wrote " << pts.size() << " samples\n";
}

void cmd_gradcheck(const Settings& s, std::ostream& out) {
    auto model = load_model(fs::path(s.required_str("model")));
    const Dataset data = read_dataset(fs::path(s.required_str("data")));
    if (data.n_x != model.n_x() || data.n_p != model.n_p())
        throw DataError("dataset dimensions do not match the model");
    CompositeLoss loss(model, data, {s.num("w1", 0.0), s.num("w2", 0.0)}, box_jacobian(data));
    const Vec theta = model.gather();
    const auto n = theta.size();
    const auto want = std::min<Eigen::Index>(s.count("coords", 50), n);
    std::vector<Eigen::Index> coords;
    for (Eigen::Index i = 0; i < want; ++i) coords.push_back(i * n / std::max<Eigen::Index>(want, 1));
    const auto rep = gradcheck(loss, theta, s.num("h", 1e-5), coords);
    model.scatter(theta);
    ojson j;
    j["dim"] = n;
    j["checked"] = coords.size();
    j["max_rel_err"] = rep.max_rel_err;
    j["max_abs_err"] = rep.max_abs_err;
    auto rows = ojson::array();
    for (std::size_t k = 0; k < coords.size(); ++k) {
        const auto i = coords[k];
        rows.push_back({{"index", i}, {"analytic", rep.analytic(i)}, {"numeric", rep.numeric(i)}});
    }
    j["coordinates"] = rows;
    out << j.dump(2) << '\n';
}

void cmd_camel(const Common& c, const Settings& s, std::ostream& out) {
    CamelConfig cfg;
    cfg.ks = s.ints("k", cfg.ks);
    cfg.pieces = s.count("pieces", cfg.pieces);
    cfg.n_samples = s.count("n_samples", cfg.n_samples);
    cfg.gamma = s.num("gamma", cfg.gamma);
    cfg.adam_epochs = s.count("epochs", cfg.adam_epochs);
    cfg.learning_rate = s.num("learning_rate", cfg.learning_rate);
    cfg.finetune_iterations = s.count("finetune_iterations", cfg.finetune_iterations);
    cfg.restarts = s.count("restarts", cfg.restarts);
    cfg.multistart = s.count("multistart", cfg.multistart);
    cfg.grid_x1 = s.count("grid_x1", cfg.grid_x1);
    cfg.grid_x2 = s.count("grid_x2", cfg.grid_x2);
    cfg.seed = s.seed();
    for (int k : cfg.ks)
        if (k < 1) throw UsageError("k must be >= 1");
    const auto dir = prepare_out(c);
    const auto rep = run_camel(cfg);
    write_camel_outputs(rep, dir);
    for (const auto& r : rep.runs)
        out << "K=" << r.K << " mse=" << format_double(r.training.best_record().mse)
            << " camel(x*)=" << format_double(r.camel_at_x_star) << " refined=" << format_double(r.refined.f) << '\n';
}

OcpConfig ocp_config(const Settings& s) {
    OcpConfig cfg;
    cfg.laps = s.count("laps", cfg.laps);
    cfg.problems_per_lap = s.count("problems_per_lap", cfg.problems_per_lap);
    cfg.lap_steps = s.count("lap_steps", cfg.lap_steps);
    cfg.augment = s.count("augment", cfg.augment);
    cfg.curvature_margin = s.num("curvature_margin", cfg.curvature_margin);
    cfg.sim_steps = s.count("sim_steps", cfg.sim_steps);
    cfg.K = s.count("K", cfg.K);
    cfg.gamma = s.num("gamma", cfg.gamma);
    cfg.w1 = s.num("w1", cfg.w1);
    cfg.w2 = s.num("w2", cfg.w2);
    cfg.adam_epochs = s.count("epochs", cfg.adam_epochs);
    cfg.learning_rate = s.num("learning_rate", cfg.learning_rate);
    cfg.finetune_iterations = s.count("finetune_iterations", cfg.finetune_iterations);
    cfg.restarts = s.count("restarts", cfg.restarts);
    cfg.seed = s.seed();
    return cfg;
}

void cmd_ocp_collect(const Common& c, const Settings& s, std::ostream& out) {
    const auto cfg = ocp_config(s);
    const auto dir = prepare_out(c);
    const LissajousPath path;
    const auto spec = OcpSpec::standard(path.length());
    std::vector<std::string> log;
    const auto data = collect_dataset(cfg, path, spec, &log);
    write_dataset(data, dir / "ocp_dataset.csv");
    std::ofstream lf(dir / "collect_log.txt");
    for (const auto& l : log) lf << l << '\n';
    out << "collected " << data.size() << " rows (" << data.optimal_count() << " optimal)\n";
}

void cmd_ocp_train(const Common& c, const Settings& s, std::ostream& out) {
    const auto cfg = ocp_config(s);
    const Dataset data = read_dataset(fs::path(s.required_str("data")));
    if (data.empty()) throw DataError("dataset is empty");
    const LissajousPath path;
    const auto spec = OcpSpec::standard(path.length());
    if (data.n_x != spec.n_u() || data.n_p != spec.n_p()) throw DataError("dataset is not an OCP dataset");
    const auto dir = prepare_out(c);
    const auto result = train_ocp(cfg, spec, data);
    save_model(result.model, dir / "ocp_model.json", train_metadata(s, result));
    write_history(result.best_record().history, dir / "history.csv");
    write_json(restart_report(result), dir / "train_report.json");
    out << "trained r2=" << format_double(result.best_record().r2) << '\n';
}

void cmd_ocp_simulate(const Common& c, const Settings& s, std::ostream& out) {
    const auto cfg = ocp_config(s);
    std::vector<InitMethod> modes;
    for (const auto& m : s.strings("modes", {"cold", "shifted_full", "shifted_2", "learned_full", "learned_2"})) {
        try {
            modes.push_back(init_method_from_string(m));
        } catch (const ContractError& e) {
            throw UsageError(e.what());
        }
    }
    std::optional<SurrogateModel> model;
    if (s.has("model")) model = load_model(fs::path(s.str("model", "")));
    for (auto m : modes)
        if ((m == InitMethod::LearnedFull || m == InitMethod::Learned2) && !model)
            throw UsageError("learned modes need --model");
    const auto dir = prepare_out(c);
    const LissajousPath path;
    const auto spec = OcpSpec::standard(path.length());
    std::vector<SimReport> reps;
    for (auto m : modes) reps.push_back(closed_loop_sim(m, cfg, path, spec, s.seed(), model ? &*model : nullptr));
    write_sim_outputs(reps, dir);
    for (const auto& r : reps) {
        std::vector<double> g;
        for (const auto& st : r.steps) g.push_back(st.residual_guess);
        out << to_string(r.method) << " median residual at guess " << format_double(median(g)) << '\n';
    }
}

} // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"minsurro: learned min-of-quasiconvex surrogates", "minsurro"};
    app.require_subcommand(1);
    Common common;
    std::function<void()> action;
    std::vector<CLI::App*> leaves;

    auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& desc) {
        auto* sub = parent->add_subcommand(name, desc);
        sub->add_option("--config", common.config, "JSON file with flat settings");
        sub->add_option("--out", common.out, "output directory");
        sub->add_flag("--force", common.force, "allow writing into a non-empty output directory");
        sub->allow_extras();
        leaves.push_back(sub);
        return sub;
    };
    auto settings = [&](CLI::App* sub) { return Settings(common.config, sub->remaining()); };

    auto* version = app.add_subcommand("version", "print the version");
    version->callback([&] { action = [&] { out << MINSURRO_VERSION << '\n'; }; });

    auto* train_cmd = leaf(&app, "train", "fit a surrogate to a dataset CSV");
    train_cmd->callback([&] {
        action = [&, train_cmd] {
            auto s = settings(train_cmd);
            s.allow({"data", "family", "K", "alpha", "pieces", "coeff_hidden", "icnn_hidden", "context_dim",
                     "encoder_layers", "head", "head_hidden", "head_activation", "shared_head", "gamma", "w1", "w2",
                     "epochs", "learning_rate", "finetune_iterations", "restarts", "seed", "selection", "x_lower",
                     "x_upper"});
            cmd_train(common, s, out);
        };
    });
    auto* solve_cmd = leaf(&app, "solve", "solve the surrogate problem at one parameter");
    solve_cmd->callback([&] {
        action = [&, solve_cmd] {
            auto s = settings(solve_cmd);
            s.allow({"model", "p", "x_lower", "x_upper", "tol", "max_iters", "parallel", "seed"});
            cmd_solve(s, out);
        };
    });
    auto* sample_cmd = leaf(&app, "sample", "projected sampling from an enlarged box");
    sample_cmd->callback([&] {
        action = [&, sample_cmd] {
            auto s = settings(sample_cmd);
            s.allow({"x_lower", "x_upper", "delta", "count", "seed"});
            cmd_sample(common, s, out);
        };
    });
    auto* grad_cmd = leaf(&app, "gradcheck", "compare the loss gradient with central differences");
    grad_cmd->callback([&] {
        action = [&, grad_cmd] {
            auto s = settings(grad_cmd);
            s.allow({"model", "data", "w1", "w2", "coords", "h", "seed"});
            cmd_gradcheck(s, out);
        };
    });

    auto* bench = app.add_subcommand("bench", "benchmarks");
    bench->require_subcommand(1);
    auto* camel_cmd = leaf(bench, "camel", "six-hump camel benchmark");
    camel_cmd->callback([&] {
        action = [&, camel_cmd] {
            auto s = settings(camel_cmd);
            s.allow({"k", "pieces", "n_samples", "gamma", "epochs", "learning_rate", "finetune_iterations", "restarts",
                     "multistart", "grid_x1", "grid_x2", "seed"});
            cmd_camel(common, s, out);
        };
    });
    auto* ocp = bench->add_subcommand("ocp", "path-tracking optimal control benchmark");
    ocp->require_subcommand(1);
    auto* collect_cmd = leaf(ocp, "collect", "collect the training dataset");
    collect_cmd->callback([&] {
        action = [&, collect_cmd] {
            auto s = settings(collect_cmd);
            s.allow({"laps", "problems_per_lap", "lap_steps", "augment", "curvature_margin", "seed"});
            cmd_ocp_collect(common, s, out);
        };
    });
    auto* ocp_train = leaf(ocp, "train", "train the ICNN surrogate");
    ocp_train->callback([&] {
        action = [&, ocp_train] {
            auto s = settings(ocp_train);
            s.allow({"data", "K", "gamma", "w1", "w2", "epochs", "learning_rate", "finetune_iterations", "restarts",
                     "seed"});
            cmd_ocp_train(common, s, out);
        };
    });
    auto* sim_cmd = leaf(ocp, "simulate", "closed-loop runs for each initialization method");
    sim_cmd->callback([&] {
        action = [&, sim_cmd] {
            auto s = settings(sim_cmd);
            s.allow({"model", "modes", "sim_steps", "seed"});
            cmd_ocp_simulate(common, s, out);
        };
    });

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }
    if (!action) {
        err << app.help();
        return 1;
    }
    try {
        action();
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

} // namespace minsurro
