#include "elcd/data/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "elcd/errors.hpp"

namespace elcd::data {

using ad::Shape;
using ad::Tensor;

void Trajectory::validate() const {
    const std::size_t n = times.size();
    if (n == 0) throw ConfigError("empty trajectory");
    if (states.rank() != 2 || velocities.rank() != 2 || states.dim(0) != n || velocities.shape() != states.shape()) {
        throw ShapeError("trajectory with " + std::to_string(n) + " times has states " +
                         ad::shape_string(states.shape()) + " and velocities " + ad::shape_string(velocities.shape()));
    }
    for (std::size_t i = 1; i < n; ++i)
        if (!(times[i] > times[i - 1])) throw ConfigError("trajectory times not strictly increasing at sample " + std::to_string(i));
    if (!states.all_finite() || !velocities.all_finite()) throw NumericalError("trajectory holds non-finite values");
}

Standardization Standardization::identity(std::size_t d) { return {std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)}; }

bool Standardization::is_identity() const {
    return std::all_of(mean.begin(), mean.end(), [](double m) { return m == 0.0; }) &&
           std::all_of(stddev.begin(), stddev.end(), [](double s) { return s == 1.0; });
}

namespace {

void check_width(const Tensor& t, std::size_t d) {
    if (t.rank() != 2 || t.dim(1) != d) {
        throw ShapeError("standardization of dimension " + std::to_string(d) + " applied to " + ad::shape_string(t.shape()));
    }
}

}  // namespace

Tensor Standardization::apply_states(const Tensor& raw) const {
    check_width(raw, mean.size());
    Tensor out = raw;
    const std::size_t d = mean.size();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (raw[i] - mean[i % d]) / stddev[i % d];
    return out;
}

Tensor Standardization::apply_velocities(const Tensor& raw) const {
    check_width(raw, mean.size());
    Tensor out = raw;
    const std::size_t d = mean.size();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = raw[i] / stddev[i % d];
    return out;
}

Tensor Standardization::invert_states(const Tensor& s) const {
    check_width(s, mean.size());
    Tensor out = s;
    const std::size_t d = mean.size();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s[i] * stddev[i % d] + mean[i % d];
    return out;
}

Tensor Standardization::invert_velocities(const Tensor& s) const {
    check_width(s, mean.size());
    Tensor out = s;
    const std::size_t d = mean.size();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s[i] * stddev[i % d];
    return out;
}

nlohmann::json Standardization::to_json() const { return {{"mean", mean}, {"std", stddev}}; }

Standardization Standardization::from_json(const nlohmann::json& j) {
    Standardization s{j.at("mean").get<std::vector<double>>(), j.at("std").get<std::vector<double>>()};
    if (s.mean.size() != s.stddev.size()) throw ConfigError("standardization mean/std lengths differ");
    return s;
}

std::size_t Dataset::dim() const { return trajectories.empty() ? 0 : trajectories.front().dim(); }

std::size_t Dataset::sample_count() const {
    std::size_t n = 0;
    for (const Trajectory& t : trajectories) n += t.length();
    return n;
}

namespace {

Tensor pool(const Dataset& ds, bool velocities) {
    const std::size_t d = ds.dim();
    Tensor out(Shape{ds.sample_count(), d});
    std::size_t offset = 0;
    for (const Trajectory& t : ds.trajectories) {
        const Tensor& src = velocities ? t.velocities : t.states;
        std::copy(src.values().begin(), src.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(offset));
        offset += src.size();
    }
    return out;
}

}  // namespace

Tensor Dataset::pooled_states() const { return pool(*this, false); }
Tensor Dataset::pooled_velocities() const { return pool(*this, true); }

void Dataset::validate() const {
    if (trajectories.empty()) throw ConfigError("dataset has no trajectories");
    const std::size_t d = dim();
    for (const Trajectory& t : trajectories) {
        t.validate();
        if (t.dim() != d) throw ShapeError("dataset mixes dimensions " + std::to_string(d) + " and " + std::to_string(t.dim()));
    }
    if (stats.mean.size() != d || stats.stddev.size() != d) throw ShapeError("standardization does not match dimension");
}

Dataset make_dataset(std::vector<Trajectory> trajectories, nlohmann::json meta) {
    Dataset ds;
    ds.trajectories = std::move(trajectories);
    ds.stats = Standardization::identity(ds.dim());
    ds.meta = std::move(meta);
    ds.validate();
    return ds;
}

std::pair<Dataset, Standardization> standardize(const Dataset& dataset) {
    dataset.validate();
    const std::size_t d = dataset.dim();
    const Tensor pooled = dataset.pooled_states();
    const std::size_t n = pooled.dim(0);
    Standardization step = Standardization::identity(d);
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += pooled.at(i, j);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (pooled.at(i, j) - mean) * (pooled.at(i, j) - mean);
        const double sd = std::sqrt(var / static_cast<double>(n));
        if (!(sd > 0.0)) throw ConfigError("cannot standardize: dimension " + std::to_string(j) + " has zero variance");
        step.mean[j] = mean;
        step.stddev[j] = sd;
    }
    Dataset out = dataset;
    for (Trajectory& t : out.trajectories) {
        t.states = step.apply_states(t.states);
        t.velocities = step.apply_velocities(t.velocities);
    }
    for (std::size_t j = 0; j < d; ++j) {
        out.stats.mean[j] = dataset.stats.mean[j] + step.mean[j] * dataset.stats.stddev[j];
        out.stats.stddev[j] = dataset.stats.stddev[j] * step.stddev[j];
    }
    return {std::move(out), step};
}

Dataset destandardize(const Dataset& dataset) {
    Dataset out = dataset;
    for (Trajectory& t : out.trajectories) {
        t.states = dataset.stats.invert_states(t.states);
        t.velocities = dataset.stats.invert_velocities(t.velocities);
    }
    out.stats = Standardization::identity(dataset.dim());
    return out;
}

Dataset trim_initial(const Dataset& dataset, std::size_t count) {
    Dataset out = dataset;
    for (Trajectory& t : out.trajectories) {
        if (count >= t.length()) {
            throw ConfigError("cannot trim " + std::to_string(count) + " samples from a trajectory of length " +
                              std::to_string(t.length()));
        }
        const std::size_t d = t.dim(), keep = t.length() - count;
        Trajectory trimmed;
        trimmed.times.assign(t.times.begin() + static_cast<std::ptrdiff_t>(count), t.times.end());
        trimmed.states = Tensor(Shape{keep, d});
        trimmed.velocities = Tensor(Shape{keep, d});
        std::copy(t.states.values().begin() + static_cast<std::ptrdiff_t>(count * d), t.states.values().end(),
                  trimmed.states.values().begin());
        std::copy(t.velocities.values().begin() + static_cast<std::ptrdiff_t>(count * d), t.velocities.values().end(),
                  trimmed.velocities.values().begin());
        t = std::move(trimmed);
    }
    return out;
}

namespace {

// Linear interpolation of rows of `values` at time `t` (inside [times.front(), times.back()]).
void interpolate(const Trajectory& tr, const Tensor& values, double t, double* out) {
    const std::size_t d = tr.dim();
    const auto it = std::upper_bound(tr.times.begin(), tr.times.end(), t);
    std::size_t hi = static_cast<std::size_t>(it - tr.times.begin());
    if (hi == 0) hi = 1;
    if (hi >= tr.length()) hi = tr.length() - 1;
    const std::size_t lo = hi - 1;
    const double w = (t - tr.times[lo]) / (tr.times[hi] - tr.times[lo]);
    for (std::size_t j = 0; j < d; ++j) out[j] = (1.0 - w) * values.at(lo, j) + w * values.at(hi, j);
}

}  // namespace

Dataset compose(const std::vector<Dataset>& inputs) {
    if (inputs.empty()) throw ConfigError("compose needs at least one input");
    const std::size_t count = inputs.front().trajectories.size();
    for (const Dataset& ds : inputs) {
        ds.validate();
        if (ds.trajectories.size() != count) {
            throw ConfigError("compose: inputs have " + std::to_string(count) + " and " +
                              std::to_string(ds.trajectories.size()) + " trajectories");
        }
    }
    std::size_t total_dim = 0;
    for (const Dataset& ds : inputs) total_dim += ds.dim();
    std::vector<Trajectory> out;
    for (std::size_t i = 0; i < count; ++i) {
        double start = -INFINITY, end = INFINITY;
        std::size_t length = SIZE_MAX;
        for (const Dataset& ds : inputs) {
            const Trajectory& t = ds.trajectories[i];
            start = std::max(start, t.times.front());
            end = std::min(end, t.times.back());
            length = std::min(length, t.length());
        }
        if (!(end > start) || length < 2) throw ConfigError("compose: trajectories " + std::to_string(i) + " do not overlap in time");
        Trajectory tr;
        tr.times.resize(length);
        for (std::size_t k = 0; k < length; ++k)
            tr.times[k] = k + 1 == length ? end : start + (end - start) * static_cast<double>(k) / static_cast<double>(length - 1);
        tr.states = Tensor(Shape{length, total_dim});
        tr.velocities = Tensor(Shape{length, total_dim});
        std::size_t offset = 0;
        for (const Dataset& ds : inputs) {
            const Trajectory& src = ds.trajectories[i];
            for (std::size_t k = 0; k < length; ++k) {
                interpolate(src, src.states, tr.times[k], tr.states.raw() + k * total_dim + offset);
                interpolate(src, src.velocities, tr.times[k], tr.velocities.raw() + k * total_dim + offset);
            }
            offset += src.dim();
        }
        out.push_back(std::move(tr));
    }
    nlohmann::json meta = {{"generator", "compose"}, {"inputs", nlohmann::json::array()}};
    for (const Dataset& ds : inputs) meta["inputs"].push_back(ds.meta);
    return make_dataset(std::move(out), std::move(meta));
}

std::filesystem::path meta_path(const std::filesystem::path& csv_path) {
    std::filesystem::path p = csv_path;
    p.replace_extension(".meta.json");
    return p;
}

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string header(std::size_t d) {
    std::string h = "traj_id,t";
    for (std::size_t j = 0; j < d; ++j) h += ",x" + std::to_string(j);
    for (std::size_t j = 0; j < d; ++j) h += ",v" + std::to_string(j);
    return h;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& cell, std::size_t line) {
    const std::string s = trim(cell);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError(line, "not a number: '" + s + "'");
    if (!std::isfinite(v)) throw ParseError(line, "non-finite value '" + s + "'");
    return v;
}

long long parse_id(const std::string& cell, std::size_t line) {
    const std::string s = trim(cell);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError(line, "traj_id must be an integer, got '" + s + "'");
    return v;
}

}  // namespace

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
    dataset.validate();
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    const std::size_t d = dataset.dim();
    out << header(d) << "\n";
    for (std::size_t i = 0; i < dataset.trajectories.size(); ++i) {
        const Trajectory& t = dataset.trajectories[i];
        for (std::size_t k = 0; k < t.length(); ++k) {
            out << i << "," << format_double(t.times[k]);
            for (std::size_t j = 0; j < d; ++j) out << "," << format_double(t.states.at(k, j));
            for (std::size_t j = 0; j < d; ++j) out << "," << format_double(t.velocities.at(k, j));
            out << "\n";
        }
    }
    if (!out) throw ConfigError("write failed for " + path.string());
    nlohmann::json meta = dataset.meta.is_object() ? dataset.meta : nlohmann::json::object();
    meta["standardization"] = dataset.stats.to_json();
    std::ofstream side(meta_path(path));
    side << meta.dump(2) << "\n";
}

Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    std::size_t d = 0;
    bool have_header = false;
    struct Rows {
        std::vector<double> times, states, velocities;
    };
    std::map<long long, Rows> groups;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::vector<std::string> cells = split(t);
        if (!have_header) {
            const std::size_t cols = cells.size();
            if (cols < 4 || (cols - 2) % 2 != 0 || t != header((cols - 2) / 2)) {
                const std::size_t guess = cols >= 4 ? (cols - 2) / 2 : 1;
                throw ParseError(line_no, "malformed header '" + t + "', expected '" + header(guess) + "'");
            }
            d = (cols - 2) / 2;
            have_header = true;
            continue;
        }
        if (cells.size() != 2 + 2 * d) {
            throw ParseError(line_no, "expected " + std::to_string(2 + 2 * d) + " columns, got " + std::to_string(cells.size()));
        }
        Rows& g = groups[parse_id(cells[0], line_no)];
        const double time = parse_double(cells[1], line_no);
        if (!g.times.empty() && !(time > g.times.back())) throw ParseError(line_no, "time not strictly increasing within traj_id " + trim(cells[0]));
        g.times.push_back(time);
        for (std::size_t j = 0; j < d; ++j) g.states.push_back(parse_double(cells[2 + j], line_no));
        for (std::size_t j = 0; j < d; ++j) g.velocities.push_back(parse_double(cells[2 + d + j], line_no));
    }
    if (!have_header) throw ParseError(line_no, "missing header, expected '" + header(1) + "' style columns");
    if (groups.empty()) throw ParseError(line_no, "no data rows");
    std::vector<Trajectory> trajectories;
    for (auto& [id, g] : groups) {
        const std::size_t n = g.times.size();
        trajectories.push_back(Trajectory{std::move(g.times), Tensor(Shape{n, d}, std::move(g.states)),
                                          Tensor(Shape{n, d}, std::move(g.velocities))});
    }
    Dataset ds = make_dataset(std::move(trajectories));
    const std::filesystem::path side = meta_path(path);
    if (std::filesystem::exists(side)) {
        std::ifstream ms(side);
        nlohmann::json meta;
        try {
            meta = nlohmann::json::parse(ms);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(0, "corrupt metadata " + side.string() + ": " + e.what());
        }
        if (meta.contains("standardization")) {
            ds.stats = Standardization::from_json(meta["standardization"]);
            if (ds.stats.mean.size() != d) throw ShapeError("metadata standardization does not match data dimension");
            meta.erase("standardization");
        }
        ds.meta = std::move(meta);
    }
    return ds;
}

}  // namespace elcd::data
