#include "elcd/model/dynamics.hpp"

#include "elcd/errors.hpp"

namespace elcd::model {

using ad::Shape;
using ad::Tensor;
using nlohmann::json;

std::string kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::Elcd: return "elcd";
        case ModelKind::Ncds: return "ncds";
        case ModelKind::Sdd: return "sdd";
        case ModelKind::Eflow: return "eflow";
    }
    return "?";
}

ModelKind parse_kind(const std::string& name) {
    if (name == "elcd") return ModelKind::Elcd;
    if (name == "ncds") return ModelKind::Ncds;
    if (name == "sdd") return ModelKind::Sdd;
    if (name == "eflow") return ModelKind::Eflow;
    throw ConfigError("unknown model kind '" + name + "' (expected elcd, ncds, sdd or eflow)");
}

void ModelSpec::validate() const {
    if (dim == 0) throw ConfigError("model dimension must be positive");
    if (!equilibrium.empty() && equilibrium.size() != dim) {
        throw ConfigError("equilibrium has " + std::to_string(equilibrium.size()) + " entries, expected " +
                          std::to_string(dim));
    }
    if (flow_hidden == 0 || spline_bins < 2 || !(spline_bound > 0.0)) throw ConfigError("bad diffeo settings");
    switch (kind) {
        case ModelKind::Elcd:
            if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0");
            if (hidden == 0) throw ConfigError("hidden width must be positive");
            if (!(sym_init >= 0.0)) throw ConfigError("sym_init must be >= 0");
            break;
        case ModelKind::Ncds:
            if (latent_dim == 0 || latent_dim > dim) throw ConfigError("ncds latent dimension must be in [1, dim]");
            if (!(ncds_epsilon > 0.0)) throw ConfigError("ncds epsilon must be > 0");
            if (quad_nodes < 2) throw ConfigError("ncds needs at least 2 quadrature nodes");
            if (!anchor.empty() && anchor.size() != dim) throw ConfigError("ncds anchor has the wrong size");
            if (!anchor_velocity.empty() && anchor_velocity.size() != dim) {
                throw ConfigError("ncds anchor velocity has the wrong size");
            }
            break;
        case ModelKind::Sdd:
            if (!(sdd_alpha > 0.0) || !(sdd_quadratic > 0.0) || !(rehu_width > 0.0) || icnn_hidden == 0) {
                throw ConfigError("sdd needs positive alpha, quadratic weight, smoothing width and width");
            }
            break;
        case ModelKind::Eflow:
            if (!(eflow_clamp > 0.0)) throw ConfigError("eflow clamp radius must be > 0");
            break;
    }
}

Tensor ModelSpec::equilibrium_tensor() const {
    if (equilibrium.empty()) return Tensor(Shape{dim});
    return Tensor(Shape{dim}, equilibrium);
}

flows::DiffeoConfig ModelSpec::diffeo_config(std::uint64_t s) const {
    flows::DiffeoConfig c;
    c.dim = dim;
    c.pattern = pattern;
    c.spline.bins = spline_bins;
    c.spline.bound = spline_bound;
    c.hidden = flow_hidden;
    c.blocks = flow_blocks;
    c.seed = s;
    return c;
}

json ModelSpec::to_json() const {
    json j;
    j["kind"] = kind_name(kind);
    j["dim"] = dim;
    j["seed"] = seed;
    const Tensor eq = equilibrium_tensor();
    j["equilibrium"] = std::vector<double>(eq.raw(), eq.raw() + eq.size());
    if (kind != ModelKind::Sdd) {
        j["diffeo"] = {{"pattern", flows::pattern_name(pattern)},
                       {"hidden", flow_hidden},
                       {"blocks", flow_blocks},
                       {"bins", spline_bins},
                       {"bound", spline_bound}};
    }
    switch (kind) {
        case ModelKind::Elcd:
            j["alpha"] = alpha;
            j["hidden"] = hidden;
            j["learn_equilibrium"] = learn_equilibrium;
            j["sym_init"] = sym_init;
            break;
        case ModelKind::Ncds:
            j["latent_dim"] = latent_dim;
            j["epsilon"] = ncds_epsilon;
            j["hidden"] = hidden;
            j["quad_nodes"] = quad_nodes;
            j["anchor"] = anchor;
            j["anchor_velocity"] = anchor_velocity;
            break;
        case ModelKind::Sdd:
            j["alpha"] = sdd_alpha;
            j["hidden"] = hidden;
            j["icnn_hidden"] = icnn_hidden;
            j["quadratic"] = sdd_quadratic;
            j["rehu_width"] = rehu_width;
            break;
        case ModelKind::Eflow:
            j["clamp"] = eflow_clamp;
            break;
    }
    return j;
}

ModelSpec ModelSpec::from_json(const json& j) {
    try {
        ModelSpec s;
        s.kind = parse_kind(j.at("kind").get<std::string>());
        s.dim = j.at("dim").get<std::size_t>();
        s.seed = j.at("seed").get<std::uint64_t>();
        s.equilibrium = j.at("equilibrium").get<std::vector<double>>();
        if (j.contains("diffeo")) {
            const json& f = j["diffeo"];
            s.pattern = flows::parse_pattern(f.at("pattern").get<std::string>());
            s.flow_hidden = f.at("hidden").get<std::size_t>();
            s.flow_blocks = f.at("blocks").get<std::size_t>();
            s.spline_bins = f.at("bins").get<std::size_t>();
            s.spline_bound = f.at("bound").get<double>();
        }
        switch (s.kind) {
            case ModelKind::Elcd:
                s.alpha = j.at("alpha").get<double>();
                s.hidden = j.at("hidden").get<std::size_t>();
                s.learn_equilibrium = j.at("learn_equilibrium").get<bool>();
                s.sym_init = j.at("sym_init").get<double>();
                break;
            case ModelKind::Ncds:
                s.latent_dim = j.at("latent_dim").get<std::size_t>();
                s.ncds_epsilon = j.at("epsilon").get<double>();
                s.hidden = j.at("hidden").get<std::size_t>();
                s.quad_nodes = j.at("quad_nodes").get<std::size_t>();
                s.anchor = j.at("anchor").get<std::vector<double>>();
                s.anchor_velocity = j.at("anchor_velocity").get<std::vector<double>>();
                break;
            case ModelKind::Sdd:
                s.sdd_alpha = j.at("alpha").get<double>();
                s.hidden = j.at("hidden").get<std::size_t>();
                s.icnn_hidden = j.at("icnn_hidden").get<std::size_t>();
                s.sdd_quadratic = j.at("quadratic").get<double>();
                s.rehu_width = j.at("rehu_width").get<double>();
                break;
            case ModelKind::Eflow:
                s.eflow_clamp = j.at("clamp").get<double>();
                break;
        }
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad model config: ") + e.what());
    }
}

Tensor DynamicsModel::predict(const Tensor& x) const {
    ad::NoGradGuard guard;
    return predict(ad::Var::constant(x)).value();
}

rollout::VectorField DynamicsModel::field() const {
    return rollout::from_batch_fn(dim(), [this](const ad::Var& x) { return predict(x); });
}

ad::ParameterRefs DynamicsModel::parameters() {
    ad::ParameterRefs out;
    collect(out);
    return out;
}

}  // namespace elcd::model
