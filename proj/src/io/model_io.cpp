#include "minsurro/io/model_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace minsurro {

namespace {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

ojson vec_json(const Vec& v) {
    auto a = ojson::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

[[noreturn]] void schema(const std::string& what) { throw DataError("model file: " + what); }

const json& field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) schema(std::string("missing field '") + key + "'");
    return j.at(key);
}

Vec read_vec(const json& j, const char* key) {
    const auto& a = field(j, key);
    if (!a.is_array()) schema(std::string("'") + key + "' must be an array");
    Vec v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i].is_number()) schema(std::string("'") + key + "' holds a non-numeric or non-finite entry");
        v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
        if (!std::isfinite(v(static_cast<Eigen::Index>(i)))) schema(std::string("'") + key + "' is not finite");
    }
    return v;
}

template <class T>
T read(const json& j, const char* key) {
    try {
        return field(j, key).get<T>();
    } catch (const json::exception&) {
        schema(std::string("field '") + key + "' has the wrong type");
    }
}

} // namespace

ojson model_to_json(const SurrogateModel& m, const ojson& metadata) {
    ojson j;
    j["format_version"] = kModelFormatVersion;
    j["n_x"] = m.n_x();
    j["n_p"] = m.n_p();
    j["K"] = m.K();
    j["gamma"] = m.gamma();
    j["shared_head"] = m.shared_head();
    auto comps = ojson::array();
    for (int i = 0; i < m.K(); ++i) {
        const auto& s = m.component(i).spec();
        ojson c;
        c["family"] = to_string(s.family);
        c["alpha"] = s.alpha;
        c["pieces"] = s.pieces;
        c["coeff_hidden"] = s.coeff_hidden;
        c["icnn_hidden"] = s.icnn_hidden;
        c["context_dim"] = s.context_dim;
        c["encoder_layers"] = s.encoder_layers;
        comps.push_back(c);
    }
    j["components"] = comps;
    auto heads = ojson::array();
    for (const auto& h : m.heads()) {
        ojson e;
        if (h.is_identity()) {
            e["type"] = "identity";
        } else {
            e["type"] = "network";
            e["hidden"] = h.net().hidden();
            auto acts = ojson::array();
            for (auto a : h.net().hidden_activations()) acts.push_back(to_string(a));
            e["activations"] = acts;
        }
        heads.push_back(e);
    }
    j["heads"] = heads;
    const auto& im = m.input_map();
    j["input_map"] = {{"x_gain", vec_json(im.x_gain)},
                      {"x_shift", vec_json(im.x_shift)},
                      {"p_gain", vec_json(im.p_gain)},
                      {"p_shift", vec_json(im.p_shift)}};
    const Vec theta = m.gather();
    for (Eigen::Index i = 0; i < theta.size(); ++i)
        if (!std::isfinite(theta(i))) throw DataError("save_model: non-finite parameter at index " + std::to_string(i));
    j["theta"] = vec_json(theta);
    j["metadata"] = metadata;
    return j;
}

SurrogateModel model_from_json(const json& j) {
    if (!j.is_object()) schema("top level must be an object");
    const int version = read<int>(j, "format_version");
    if (version != kModelFormatVersion)
        schema("unsupported format_version " + std::to_string(version) + " (expected " +
               std::to_string(kModelFormatVersion) + ")");
    const int n_x = read<int>(j, "n_x");
    const int n_p = read<int>(j, "n_p");
    const int K = read<int>(j, "K");
    const auto& comps = field(j, "components");
    const auto& heads = field(j, "heads");
    if (!comps.is_array() || static_cast<int>(comps.size()) != K) schema("'components' must list K entries");
    if (!heads.is_array()) schema("'heads' must be an array");

    std::vector<ConvexComponent> components;
    try {
        for (const auto& c : comps) {
            ComponentSpec s;
            s.family = family_from_string(read<std::string>(c, "family"));
            s.n_x = n_x;
            s.n_p = n_p;
            s.alpha = read<double>(c, "alpha");
            s.pieces = read<int>(c, "pieces");
            s.coeff_hidden = read<std::vector<int>>(c, "coeff_hidden");
            s.icnn_hidden = read<std::vector<int>>(c, "icnn_hidden");
            s.context_dim = read<int>(c, "context_dim");
            s.encoder_layers = read<int>(c, "encoder_layers");
            components.emplace_back(s);
        }
        std::vector<MonotoneHead> hs;
        for (const auto& h : heads) {
            const auto type = read<std::string>(h, "type");
            if (type == "identity") {
                hs.push_back(MonotoneHead::identity());
            } else if (type == "network") {
                std::vector<Activation> acts;
                for (const auto& a : read<std::vector<std::string>>(h, "activations"))
                    acts.push_back(activation_from_string(a));
                hs.push_back(MonotoneHead::network(read<std::vector<int>>(h, "hidden"), acts));
            } else {
                schema("unknown head type '" + type + "'");
            }
        }
        SurrogateModel m(n_x, n_p, std::move(components), std::move(hs), read<bool>(j, "shared_head"),
                         read<double>(j, "gamma"));
        const auto& im = field(j, "input_map");
        InputMap map{read_vec(im, "x_gain"), read_vec(im, "x_shift"), read_vec(im, "p_gain"), read_vec(im, "p_shift")};
        if (map.x_gain.size() != n_x || map.x_shift.size() != n_x || map.p_gain.size() != n_p ||
            map.p_shift.size() != n_p)
            schema("input map lengths do not match n_x / n_p");
        m.set_input_map(map);
        const Vec theta = read_vec(j, "theta");
        if (static_cast<std::size_t>(theta.size()) != m.parameter_count())
            schema("theta length mismatch: expected " + std::to_string(m.parameter_count()) + ", got " +
                   std::to_string(theta.size()));
        m.scatter(theta);
        return m;
    } catch (const ContractError& e) {
        schema(e.what());
    }
}

void save_model(const SurrogateModel& model, const std::filesystem::path& path, const ojson& metadata) {
    const auto j = model_to_json(model, metadata);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file " + path.string());
    out << j.dump(2) << '\n';
}

SurrogateModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("model file not found: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        schema(std::string("not valid JSON (") + e.what() + ")");
    }
    return model_from_json(j);
}

} // namespace minsurro
