#include "elcd/train/checkpoint.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "elcd/errors.hpp"
#include "elcd/train/trainer.hpp"

namespace elcd::train {

using ad::Shape;
using ad::Tensor;
using nlohmann::json;

std::string hex_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_hex_double(const std::string& s) {
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) throw ConfigError("bad float '" + s + "'");
    return v;
}

namespace {

json hex_array(const Tensor& t) {
    json a = json::array();
    for (double v : t.values()) a.push_back(hex_double(v));
    return a;
}

std::vector<double> read_hex_array(const json& a, const std::string& what) {
    if (!a.is_array()) throw ConfigError(what + " is not an array");
    std::vector<double> out;
    out.reserve(a.size());
    for (const json& e : a) {
        if (!e.is_string()) throw ConfigError(what + " holds a non-string entry");
        out.push_back(parse_hex_double(e.get<std::string>()));
    }
    return out;
}

}  // namespace

json checkpoint_json(const model::DynamicsModel& m, const data::Standardization& stats, const json& train_config) {
    json params = json::array();
    auto& mm = const_cast<model::DynamicsModel&>(m);  // collect() hands out mutable refs; nothing is written
    for (const ad::Parameter* p : mm.parameters()) {
        params.push_back({{"name", p->id()}, {"shape", p->value().shape()}, {"data", hex_array(p->value())}});
    }
    json j;
    j["version"] = kCheckpointVersion;
    j["model_kind"] = model::kind_name(m.kind());
    j["configs"] = {{"model", m.spec().to_json()}, {"train", train_config}};
    j["params"] = std::move(params);
    j["standardization"] = stats.to_json();
    j["equilibrium"] = hex_array(m.equilibrium());
    return j;
}

std::string checkpoint_text(const model::DynamicsModel& m, const data::Standardization& stats, const json& train_config) {
    return checkpoint_json(m, stats, train_config).dump(1) + "\n";
}

void save_checkpoint(const std::filesystem::path& path, const model::DynamicsModel& m,
                     const data::Standardization& stats, const json& train_config) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write checkpoint " + path.string());
    out << checkpoint_text(m, stats, train_config);
    if (!out) throw ConfigError("failed writing checkpoint " + path.string());
}

Checkpoint checkpoint_from_json(const json& j) {
    try {
        const int version = j.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw ConfigError("checkpoint version " + std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointVersion));
        }
        const model::ModelSpec spec = model::ModelSpec::from_json(j.at("configs").at("model"));
        if (model::kind_name(spec.kind) != j.at("model_kind").get<std::string>()) {
            throw ConfigError("model_kind does not match the model config");
        }
        Checkpoint ck;
        ck.model = make_model(spec);
        ck.train_config = j.at("configs").at("train");
        ck.standardization = data::Standardization::from_json(j.at("standardization"));

        std::map<std::string, const json*> stored;
        for (const json& p : j.at("params")) {
            const std::string name = p.at("name").get<std::string>();
            if (!stored.emplace(name, &p).second) throw ConfigError("duplicate parameter " + name);
        }
        std::set<std::string> used;
        for (ad::Parameter* p : ck.model->parameters()) {
            const auto it = stored.find(p->id());
            if (it == stored.end()) throw ConfigError("checkpoint lacks parameter " + p->id());
            const Shape shape = it->second->at("shape").get<Shape>();
            if (shape != p->value().shape()) {
                throw ShapeError("parameter " + p->id() + ": checkpoint shape " + ad::shape_string(shape) +
                                 ", model expects " + ad::shape_string(p->value().shape()));
            }
            std::vector<double> data = read_hex_array(it->second->at("data"), "parameter " + p->id());
            if (data.size() != p->value().size()) {
                throw ShapeError("parameter " + p->id() + ": " + std::to_string(data.size()) + " values for shape " +
                                 ad::shape_string(shape));
            }
            p->set_value(Tensor(shape, std::move(data)));
            used.insert(p->id());
        }
        for (const auto& [name, _] : stored)
            if (!used.count(name)) throw ConfigError("checkpoint has unknown parameter " + name);

        const std::vector<double> eq = read_hex_array(j.at("equilibrium"), "equilibrium");
        const Tensor current = ck.model->equilibrium();
        if (eq.size() != current.size()) throw ShapeError("equilibrium has the wrong dimension");
        for (std::size_t i = 0; i < eq.size(); ++i)
            if (eq[i] != current[i]) throw ConfigError("equilibrium disagrees with the stored parameters");
        return ck;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed checkpoint: ") + e.what());
    }
}

Checkpoint parse_checkpoint(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
        const std::size_t line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + upto, '\n'));
        throw ParseError(line, std::string("corrupt checkpoint: ") + e.what());
    }
    return checkpoint_from_json(j);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_checkpoint(ss.str());
}

}  // namespace elcd::train
