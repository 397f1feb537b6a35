#include "elcd/cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>

#include "elcd/cli/plot.hpp"
#include "elcd/data/generators.hpp"
#include "elcd/errors.hpp"
#include "elcd/rollout/rollout.hpp"
#include "elcd/train/checkpoint.hpp"
#include "elcd/train/composed.hpp"
#include "elcd/train/trainer.hpp"
#include "elcd/verify/verify.hpp"

namespace elcd::cli {

using ad::Shape;
using ad::Tensor;

namespace {

std::uint64_t env_seed() {
    const char* s = std::getenv("ELCD_SEED");
    if (!s || !*s) return 0;
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(s, &used);
        if (used != std::string(s).size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(std::string("ELCD_SEED must be a non-negative integer, got '") + s + "'");
    }
}

std::string quoted(const std::string& v) {
    if (!v.empty() && v.find_first_of(" \t\"'") == std::string::npos) return v;
    std::string out = "'";
    for (char c : v) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return out + "'";
}

/// `elcd <sub> [<sub>] --flag value ...` with every option at its resolved value.
std::string resolved_line(const CLI::App* leaf) {
    std::vector<const CLI::App*> chain;
    for (const CLI::App* a = leaf; a && a->get_parent(); a = a->get_parent()) chain.push_back(a);
    std::reverse(chain.begin(), chain.end());
    std::string line = "elcd";
    for (const CLI::App* a : chain) line += " " + a->get_name();
    for (const CLI::App* a : chain) {
        for (const CLI::Option* opt : a->get_options()) {
            if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
            const std::string flag = " --" + opt->get_lnames().front();
            if (opt->get_expected_max() == 0) {
                if (opt->count() > 0) line += flag;
                continue;
            }
            std::vector<std::string> values;
            if (opt->count() > 0) {
                values = opt->results();
            } else {
                const std::string def = opt->get_default_str();
                if (def.empty() || def == "[]") continue;
                values.push_back(def);
            }
            line += flag;
            for (const std::string& v : values) line += " " + quoted(v);
        }
    }
    return line;
}

/// Shortest text that reads back to the same double.
std::string exact(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

CLI::Option* add_double(CLI::App* app, const std::string& name, double& value, const std::string& help) {
    return app->add_option(name, value, help)->default_str(exact(value));
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("bad number '" + item + "' in " + what);
        }
    }
    if (out.empty()) throw ConfigError(what + " is empty");
    return out;
}

/// Loads a trajectory CSV and returns it in raw units.
data::Dataset load_raw(const std::string& path) {
    data::Dataset ds = data::load_csv(path);
    return ds.stats.is_identity() ? ds : data::destandardize(ds);
}

/// Raw data mapped into a checkpoint's training coordinates.
data::Dataset prepare(const data::Dataset& raw, const train::Checkpoint& ck) {
    const std::size_t trim = ck.train_config.value("trim", std::size_t{0});
    data::Dataset ds = trim > 0 ? data::trim_initial(raw, trim) : raw;
    if (ds.dim() != ck.model->dim()) {
        throw ShapeError("data dimension " + std::to_string(ds.dim()) + " does not match the checkpoint's " +
                         std::to_string(ck.model->dim()));
    }
    for (auto& t : ds.trajectories) {
        t.states = ck.standardization.apply_states(t.states);
        t.velocities = ck.standardization.apply_velocities(t.velocities);
    }
    ds.stats = ck.standardization;
    return ds;
}

std::string stem(const std::string& path) { return std::filesystem::path(path).stem().string(); }

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path);
    f << text;
    if (!f) throw ConfigError("write failed: " + path);
}

// --- gen-data -----------------------------------------------------------------

struct GenArgs {
    std::string out;
    std::uint64_t seed = 0;
    data::PendulumConfig pendulum;
    data::RosenbrockConfig rosenbrock;
    double toy_dt = 0.01;
    double toy_horizon = 5.0;
};

void report_dataset(std::ostream& out, const data::Dataset& ds, const std::string& path) {
    out << "wrote " << ds.trajectories.size() << " trajectories, dimension " << ds.dim() << ", "
        << ds.sample_count() << " samples to " << path << "\n";
}

// --- train --------------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string model = "elcd";
    std::string out;
    std::size_t trim = 5;
    bool no_standardize = false;
    bool quiet = false;
    train::TrainConfig cfg;
    std::optional<double> alpha;
    std::optional<std::size_t> hidden;
    std::optional<std::string> pattern;
    std::optional<std::size_t> flow_hidden;
    std::optional<std::size_t> flow_blocks;
    std::optional<std::size_t> bins;
    std::optional<std::size_t> latent_dim;
    std::optional<double> epsilon;
    bool learn_equilibrium = false;
};

model::ModelSpec build_spec(const TrainArgs& a, const data::Dataset& ds) {
    model::ModelSpec s = train::spec_for(model::parse_kind(a.model), ds, a.cfg.seed);
    if (a.alpha) (s.kind == model::ModelKind::Sdd ? s.sdd_alpha : s.alpha) = *a.alpha;
    if (a.hidden) (s.kind == model::ModelKind::Sdd ? s.icnn_hidden : s.hidden) = *a.hidden;
    if (a.pattern) s.pattern = flows::parse_pattern(*a.pattern);
    if (a.flow_hidden) s.flow_hidden = *a.flow_hidden;
    if (a.flow_blocks) s.flow_blocks = *a.flow_blocks;
    if (a.bins) s.spline_bins = *a.bins;
    if (a.latent_dim) s.latent_dim = *a.latent_dim;
    if (a.epsilon) s.ncds_epsilon = *a.epsilon;
    s.learn_equilibrium = a.learn_equilibrium;
    s.validate();
    return s;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
    const data::Dataset raw = load_raw(a.data);
    data::Dataset ds = a.trim > 0 ? data::trim_initial(raw, a.trim) : raw;
    data::Standardization st = data::Standardization::identity(ds.dim());
    if (!a.no_standardize) std::tie(ds, st) = data::standardize(ds);
    const model::ModelSpec spec = build_spec(a, ds);
    auto m = train::make_model(spec);
    out << "model: " << spec.to_json().dump() << "\n";
    const auto res = train::train(*m, ds, a.cfg, [&](const train::EpochReport& r) {
        if (!a.quiet) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "epoch %zu loss %.6e steps %zu", r.epoch, r.loss, r.steps);
            out << buf << "\n";
        }
    });
    nlohmann::json tc = a.cfg.to_json();
    tc["trim"] = a.trim;
    tc["standardize"] = !a.no_standardize;
    train::save_checkpoint(a.out, *m, st, tc);
    out << "trained " << res.steps << " steps; checkpoint " << a.out << "\n";
    return kOk;
}

// --- rollout ------------------------------------------------------------------

struct RolloutArgs {
    std::string ckpt;
    std::optional<std::string> x0;
    std::optional<std::string> from_data;
    double dt = 0.01;
    std::optional<double> horizon;
    std::string integrator = "rk4";
    std::string out;
};

int cmd_rollout(const RolloutArgs& a, std::ostream& out) {
    if (a.x0.has_value() == a.from_data.has_value()) throw ConfigError("rollout needs exactly one of --x0, --from-data");
    const train::Checkpoint ck = train::load_checkpoint(a.ckpt);
    const std::size_t d = ck.model->dim();
    const rollout::Scheme scheme = rollout::parse_scheme(a.integrator);
    const auto field = ck.model->field();
    std::vector<data::Trajectory> result;

    auto run_one = [&](const Tensor& start_raw, double horizon) {
        const Tensor start = ck.standardization.apply_states(start_raw.reshaped(Shape{1, d})).row(0);
        data::Trajectory t = rollout::integrate(field, start, {scheme, a.dt, horizon});
        t.states = ck.standardization.invert_states(t.states);
        t.velocities = ck.standardization.invert_velocities(t.velocities);
        result.push_back(std::move(t));
    };

    if (a.x0) {
        const std::vector<double> x = parse_list(*a.x0, "--x0");
        if (x.size() != d) {
            throw ShapeError("--x0 has " + std::to_string(x.size()) + " entries, model dimension is " +
                             std::to_string(d));
        }
        run_one(Tensor::vector(x), a.horizon.value_or(10.0));
    } else {
        const data::Dataset raw = load_raw(*a.from_data);
        const std::size_t trim = ck.train_config.value("trim", std::size_t{0});
        const data::Dataset ds = trim > 0 ? data::trim_initial(raw, trim) : raw;
        if (ds.dim() != d) throw ShapeError("data dimension " + std::to_string(ds.dim()) + " vs model " + std::to_string(d));
        for (const auto& t : ds.trajectories) run_one(t.states.row(0), a.horizon.value_or(std::max(t.duration(), a.dt)));
    }
    data::Dataset res = data::make_dataset(std::move(result),
                                           {{"source", "rollout"}, {"checkpoint", a.ckpt},
                                            {"integrator", rollout::scheme_name(scheme)}, {"dt", a.dt}});
    data::save_csv(res, a.out);
    out << "wrote " << res.trajectories.size() << " rollouts of " << res.trajectories.front().length()
        << " samples to " << a.out << "\n";
    return kOk;
}

// --- eval ---------------------------------------------------------------------

struct EvalArgs {
    std::vector<std::string> ckpts;
    std::string data;
    std::size_t runs = 1;
    std::string name;
    std::string integrator = "rk4";
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    if (a.runs == 0) throw ConfigError("--runs must be >= 1");
    if (a.ckpts.size() > 1 && a.runs > 1) throw ConfigError("--runs > 1 retrains one checkpoint; pass a single --ckpt");
    const rollout::Scheme scheme = rollout::parse_scheme(a.integrator);
    const data::Dataset raw = load_raw(a.data);
    const std::string dataset = a.name.empty() ? stem(a.data) : a.name;
    std::vector<double> pooled;
    std::string kind;

    auto score = [&](const model::DynamicsModel& m, const data::Dataset& ds, const std::string& label) {
        const rollout::EvalSummary s = rollout::eval_model(m.field(), ds, scheme);
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s: mean %.6f std %.6f over %zu demonstrations", label.c_str(), s.mean, s.std,
                      s.scores.size());
        out << buf << "\n";
        pooled.insert(pooled.end(), s.scores.begin(), s.scores.end());
    };

    if (a.runs == 1) {
        for (const std::string& path : a.ckpts) {
            const train::Checkpoint ck = train::load_checkpoint(path);
            kind = model::kind_name(ck.model->kind());
            score(*ck.model, prepare(raw, ck), path);
        }
    } else {
        const train::Checkpoint ck = train::load_checkpoint(a.ckpts.front());
        kind = model::kind_name(ck.model->kind());
        const data::Dataset ds = prepare(raw, ck);
        const train::TrainConfig base = train::TrainConfig::from_json(ck.train_config);
        for (std::size_t i = 0; i < a.runs; ++i) {
            model::ModelSpec spec = ck.model->spec();
            spec.seed += i;
            train::TrainConfig cfg = base;
            cfg.seed += i;
            auto m = train::make_model(spec);
            train::train(*m, ds, cfg);
            score(*m, ds, "run " + std::to_string(i) + " seed " + std::to_string(cfg.seed));
        }
    }
    const rollout::EvalSummary total = rollout::EvalSummary::from_scores(pooled);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s %s: %.2f ± %.2f", kind.c_str(), dataset.c_str(), total.mean, total.std);
    out << buf << "\n" << rollout::EvalSummary::csv_header() << "\n" << total.csv_row(kind, dataset) << "\n";
    return kOk;
}

// --- verify -------------------------------------------------------------------

struct VerifyArgs {
    std::string ckpt;
    std::optional<std::string> data;
    std::size_t samples = 10;
    std::size_t rollouts = 20;
    double c = 1e-3;
    std::optional<std::string> space;
    std::optional<double> rate;
    double metric_dt = 1e-2;
    std::optional<double> metric_tmax;
    double bound_horizon = 20.0;
    std::uint64_t seed = 0;
    std::optional<std::string> csv;
};

int cmd_verify(const VerifyArgs& a, std::ostream& out) {
    const train::Checkpoint ck = train::load_checkpoint(a.ckpt);
    const model::DynamicsModel& m = *ck.model;
    const std::size_t d = m.dim();
    const bool is_elcd = m.kind() == model::ModelKind::Elcd;
    const std::string space = a.space.value_or(is_elcd ? "latent" : "data");
    if (space != "latent" && space != "data") throw ConfigError("--space must be latent or data, got " + space);
    if (space == "latent" && !is_elcd) throw ConfigError("--space latent needs an elcd checkpoint");

    // Box source: data rows in model coordinates, else x* +- 2 (unit-variance scale).
    Tensor rows;
    if (a.data) {
        rows = prepare(load_raw(*a.data), ck).pooled_states();
    } else {
        const Tensor eq = m.equilibrium();
        rows = Tensor(Shape{2, d});
        for (std::size_t k = 0; k < d; ++k) {
            rows.at(0, k) = eq[k] - 2.0;
            rows.at(1, k) = eq[k] + 2.0;
        }
    }

    verify::VerifyConfig cfg;
    cfg.rate = a.rate.value_or(is_elcd ? m.spec().alpha : 0.0);
    cfg.contraction_rate = a.c;
    cfg.samples = a.samples;
    cfg.rollouts = a.rollouts;
    cfg.seed = a.seed;
    cfg.bound.horizon = a.bound_horizon;
    cfg.metric = verify::MetricConfig::for_rate(cfg.rate > 0.0 ? cfg.rate : 0.05);
    cfg.metric.dt = a.metric_dt;
    if (a.metric_tmax) cfg.metric.t_max = *a.metric_tmax;

    verify::VerifyReport rep;
    if (space == "latent") {
        const auto& composed = dynamic_cast<const train::ComposedElcd&>(m);
        const verify::LatentView view = composed.latent_view();
        rep = verify::verify_field(view.field, view.target, view.encode(rows), cfg);
        out << "space: latent (dimension " << d << ")\n";
    } else if (is_elcd) {
        rep = verify::verify_field(m.field(), m.equilibrium(), rows, cfg,
                                   dynamic_cast<const train::ComposedElcd&>(m).latent_view());
        out << "space: data (exponential bound on the latent field)\n";
    } else {
        rep = verify::verify_field(m.field(), m.equilibrium(), rows, cfg);
        out << "space: data\n";
    }
    out << rep.text();
    if (a.csv) write_text(*a.csv, rep.csv());
    out << (rep.passed() ? "verify: all checks passed" : "verify: FAILED") << "\n";
    return rep.passed() ? kOk : kVerifyFailed;
}

// --- plot ---------------------------------------------------------------------

struct PlotArgs {
    std::string data;
    std::optional<std::string> ckpt;
    std::string dims = "0,1";
    std::size_t grid = 20;
    bool raw_arrows = false;
    bool no_rollouts = false;
    std::string out;
};

int cmd_plot(const PlotArgs& a, std::ostream& out) {
    const data::Dataset raw = load_raw(a.data);
    const std::vector<double> dims = parse_list(a.dims, "--dims");
    if (dims.size() != 2) throw ConfigError("--dims takes two indices i,j");
    for (double v : dims) {
        if (v < 0 || v != std::floor(v)) throw ConfigError("--dims must be non-negative integers");
    }
    PlotOptions opts;
    opts.dim_x = static_cast<std::size_t>(dims[0]);
    opts.dim_y = static_cast<std::size_t>(dims[1]);
    opts.grid = a.grid;
    opts.raw_arrows = a.raw_arrows;
    opts.rollouts = !a.no_rollouts;
    std::string svg;
    if (a.ckpt) {
        const train::Checkpoint ck = train::load_checkpoint(*a.ckpt);
        const std::size_t trim = ck.train_config.value("trim", std::size_t{0});
        svg = render_svg(trim > 0 ? data::trim_initial(raw, trim) : raw, ck.model.get(), ck.standardization, opts);
    } else {
        svg = render_svg(raw, nullptr, data::Standardization::identity(raw.dim()), opts);
    }
    write_text(a.out, svg);
    out << "wrote " << a.out << "\n";
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::uint64_t seed = 0;
    try {
        seed = env_seed();
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }

    CLI::App app{"Contracting dynamics from demonstrations", "elcd"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);

    // gen-data
    GenArgs gen;
    gen.seed = seed;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a trajectory dataset");
    gen_cmd->require_subcommand(1);
    gen_cmd->add_option("--out", gen.out, "Output CSV")->required();
    gen_cmd->add_option("--seed", gen.seed, "Random seed (ELCD_SEED fallback)");
    auto* gen_pend = gen_cmd->add_subcommand("pendulum", "Damped n-link pendulum");
    gen_pend->add_option("--links", gen.pendulum.links, "Number of links")->check(CLI::PositiveNumber);
    gen_pend->add_option("--trajs", gen.pendulum.trajectories, "Number of trajectories")->check(CLI::PositiveNumber);
    add_double(gen_pend, "--damping", gen.pendulum.damping, "Joint damping");
    add_double(gen_pend, "--dt", gen.pendulum.dt, "Sample interval");
    add_double(gen_pend, "--horizon", gen.pendulum.horizon, "Duration");
    add_double(gen_pend, "--angle-range", gen.pendulum.angle_range, "Initial angles in [-r, r]");
    auto* gen_rosen = gen_cmd->add_subcommand("rosenbrock", "Gradient flow of a chained Rosenbrock function");
    gen_rosen->add_option("--dim", gen.rosenbrock.dim, "State dimension")->check(CLI::Range(2, 64));
    gen_rosen->add_option("--trajs", gen.rosenbrock.trajectories, "Number of trajectories")->check(CLI::PositiveNumber);
    add_double(gen_rosen, "--dt", gen.rosenbrock.dt, "Sample interval");
    add_double(gen_rosen, "--horizon", gen.rosenbrock.horizon, "Duration");
    add_double(gen_rosen, "--init-low", gen.rosenbrock.init_low, "Initial points lower bound");
    add_double(gen_rosen, "--init-high", gen.rosenbrock.init_high, "Initial points upper bound");
    auto* gen_toy = gen_cmd->add_subcommand("toy-linear", "Linear system [[-1, 4], [0, -1]] from (0, +-2)");
    for (CLI::App* kind : {gen_pend, gen_rosen, gen_toy}) kind->fallthrough();
    add_double(gen_toy, "--dt", gen.toy_dt, "Sample interval");
    add_double(gen_toy, "--horizon", gen.toy_horizon, "Duration");

    // compose
    std::vector<std::string> compose_inputs;
    std::string compose_out;
    auto* compose_cmd = app.add_subcommand("compose", "Stack datasets into higher-dimensional trajectories");
    compose_cmd->add_option("--inputs", compose_inputs, "Input CSVs")->required()->expected(1, -1);
    compose_cmd->add_option("--out", compose_out, "Output CSV")->required();

    // train
    TrainArgs tr;
    tr.cfg.seed = seed;
    auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset");
    train_cmd->add_option("--data", tr.data, "Trajectory CSV")->required();
    train_cmd->add_option("--model", tr.model, "elcd, ncds, sdd or eflow");
    train_cmd->add_option("--alpha", tr.alpha, "Contraction rate (elcd) or decay rate (sdd)");
    train_cmd->add_option("--epochs", tr.cfg.epochs, "Epochs");
    train_cmd->add_option("--batch", tr.cfg.batch_size, "Batch size");
    add_double(train_cmd, "--lr", tr.cfg.lr, "Adam learning rate");
    train_cmd->add_option("--max-steps", tr.cfg.max_steps, "Stop after this many steps (0: no limit)");
    train_cmd->add_option("--seed", tr.cfg.seed, "Seed for initialization and shuffling (ELCD_SEED fallback)");
    train_cmd->add_option("--trim", tr.trim, "Initial samples dropped per trajectory");
    train_cmd->add_flag("--no-standardize", tr.no_standardize, "Train in raw units");
    train_cmd->add_option("--hidden", tr.hidden, "Hidden width of the matrix (elcd) or ICNN (sdd) networks");
    train_cmd->add_option("--pattern", tr.pattern, "Diffeomorphism stack: full, linear or identity");
    train_cmd->add_option("--flow-hidden", tr.flow_hidden, "Coupling conditioner width");
    train_cmd->add_option("--flow-blocks", tr.flow_blocks, "Residual blocks per conditioner");
    train_cmd->add_option("--bins", tr.bins, "Spline bins");
    train_cmd->add_option("--latent-dim", tr.latent_dim, "NCDS latent dimension");
    train_cmd->add_option("--epsilon", tr.epsilon, "NCDS contraction margin");
    train_cmd->add_flag("--learn-equilibrium", tr.learn_equilibrium, "Make the elcd equilibrium trainable");
    train_cmd->add_flag("--quiet", tr.quiet, "No per-epoch output");
    train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();

    // rollout
    RolloutArgs ro;
    auto* rollout_cmd = app.add_subcommand("rollout", "Integrate a trained model");
    rollout_cmd->add_option("--ckpt", ro.ckpt, "Checkpoint")->required();
    rollout_cmd->add_option("--x0", ro.x0, "Initial state v1,v2,... in raw units");
    rollout_cmd->add_option("--from-data", ro.from_data, "Start from the first state of each trajectory");
    add_double(rollout_cmd, "--dt", ro.dt, "Step size")->check(CLI::PositiveNumber);
    rollout_cmd->add_option("--horizon", ro.horizon, "Duration (default 10, or each demonstration's duration)");
    rollout_cmd->add_option("--integrator", ro.integrator, "rk4 or euler");
    rollout_cmd->add_option("--out", ro.out, "Output CSV")->required();

    // eval
    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Mean and std of DTWD against demonstrations");
    eval_cmd->add_option("--ckpt", ev.ckpts, "Checkpoint(s); several are pooled as runs")->required()->expected(1, -1);
    eval_cmd->add_option("--data", ev.data, "Trajectory CSV")->required();
    eval_cmd->add_option("--runs", ev.runs, "Retrain with seeds seed+i and pool the scores");
    eval_cmd->add_option("--name", ev.name, "Dataset label (default: file stem)");
    eval_cmd->add_option("--integrator", ev.integrator, "rk4 or euler");

    // verify
    VerifyArgs ve;
    ve.seed = seed;
    auto* verify_cmd = app.add_subcommand("verify", "Numerical contraction checks");
    verify_cmd->add_option("--ckpt", ve.ckpt, "Checkpoint")->required();
    verify_cmd->add_option("--data", ve.data, "Sample in the inflated box of this data (default x* +- 2)");
    verify_cmd->add_option("--samples", ve.samples, "Metric sample points");
    verify_cmd->add_option("--rollouts", ve.rollouts, "Rollouts for the exponential bound");
    add_double(verify_cmd, "--c", ve.c, "Contraction rate to certify")->check(CLI::NonNegativeNumber);
    verify_cmd->add_option("--space", ve.space, "latent or data (default latent for elcd)");
    verify_cmd->add_option("--rate", ve.rate, "Rate in the exponential bound (default: model alpha, 0 for baselines)");
    add_double(verify_cmd, "--metric-dt", ve.metric_dt, "Quadrature step of the converse metric")
        ->check(CLI::PositiveNumber);
    verify_cmd->add_option("--metric-tmax", ve.metric_tmax, "Quadrature horizon cap (default 50 / rate)");
    add_double(verify_cmd, "--bound-horizon", ve.bound_horizon, "Rollout duration of the bound check");
    verify_cmd->add_option("--seed", ve.seed, "Sampling seed (ELCD_SEED fallback)");
    verify_cmd->add_option("--csv", ve.csv, "Per-sample CSV report");

    // plot
    PlotArgs pl;
    auto* plot_cmd = app.add_subcommand("plot", "SVG of demonstrations, rollouts and the field");
    plot_cmd->add_option("--data", pl.data, "Trajectory CSV")->required();
    plot_cmd->add_option("--ckpt", pl.ckpt, "Checkpoint (omit to plot data only)");
    plot_cmd->add_option("--dims", pl.dims, "Plotted coordinates i,j");
    plot_cmd->add_option("--grid", pl.grid, "Arrows per side");
    plot_cmd->add_flag("--raw-arrows", pl.raw_arrows, "Keep relative arrow lengths");
    plot_cmd->add_flag("--no-rollouts", pl.no_rollouts, "Skip model rollouts");
    plot_cmd->add_option("--out", pl.out, "Output SVG")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    }

    const CLI::App* leaf = app.get_subcommands().front();
    while (!leaf->get_subcommands().empty()) leaf = leaf->get_subcommands().front();
    out << "# " << resolved_line(leaf) << "\n";

    try {
        if (gen_cmd->parsed()) {
            data::Dataset ds;
            if (gen_pend->parsed()) {
                ds = data::gen_pendulum(gen.pendulum, gen.seed);
            } else if (gen_rosen->parsed()) {
                gen.rosenbrock.seed = gen.seed;
                ds = data::gen_rosenbrock(gen.rosenbrock);
            } else {
                ds = data::gen_toy_linear(gen.toy_dt, gen.toy_horizon);
            }
            data::save_csv(ds, gen.out);
            report_dataset(out, ds, gen.out);
            return kOk;
        }
        if (compose_cmd->parsed()) {
            std::vector<data::Dataset> inputs;
            for (const std::string& p : compose_inputs) inputs.push_back(load_raw(p));
            const data::Dataset ds = data::compose(inputs);
            data::save_csv(ds, compose_out);
            report_dataset(out, ds, compose_out);
            return kOk;
        }
        if (train_cmd->parsed()) return cmd_train(tr, out);
        if (rollout_cmd->parsed()) return cmd_rollout(ro, out);
        if (eval_cmd->parsed()) return cmd_eval(ev, out);
        if (verify_cmd->parsed()) return cmd_verify(ve, out);
        if (plot_cmd->parsed()) return cmd_plot(pl, out);
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const SingularMatrixError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}

}  // namespace elcd::cli
