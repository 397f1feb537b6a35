#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "elcd/cli/cli.hpp"
#include "elcd/cli/plot.hpp"
#include "elcd/data/generators.hpp"
#include "elcd/rollout/rollout.hpp"
#include "elcd/train/checkpoint.hpp"
#include "test_util.hpp"

using namespace elcd;
using ad::Shape;
using ad::Tensor;
namespace fs = std::filesystem;
namespace tu = elcd::testing;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("elcd_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        unsetenv("ELCD_SEED");
    }
    void TearDown() override {
        fs::remove_all(dir_);
        unsetenv("ELCD_SEED");
    }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

std::string slurp(const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::size_t count(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

/// Resolved-config line split into arguments (values contain no spaces here).
std::vector<std::string> resolved_args(const std::string& out) {
    const std::string first = out.substr(0, out.find('\n'));
    EXPECT_EQ(first.rfind("# elcd ", 0), 0u) << first;
    std::istringstream ss(first.substr(7));
    std::vector<std::string> args;
    for (std::string t; ss >> t;) args.push_back(t);
    return args;
}

/// Checkpoint of the exact toy model in raw units.
void save_exact_toy(const std::string& p) {
    const auto m = tu::toy_exact_model();
    train::save_checkpoint(p, m, data::Standardization::identity(2), {{"trim", 0}});
}

// Tag balance of an SVG document: every opened element is closed in order.
bool well_formed(const std::string& xml) {
    std::vector<std::string> stack;
    const std::regex tag(R"(<(/?)([A-Za-z]+)[^>]*?(/?)>)");
    for (auto it = std::sregex_iterator(xml.begin(), xml.end(), tag); it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        if (m[1] == "/") {
            if (stack.empty() || stack.back() != m[2]) return false;
            stack.pop_back();
        } else if (m[3] != "/") {
            stack.push_back(m[2]);
        }
    }
    return stack.empty() && xml.rfind("<?xml", 0) == 0;
}

}  // namespace

TEST_F(CliTest, UsageErrors) {
    EXPECT_EQ(run({}).code, cli::kUsage);
    EXPECT_EQ(run({"bogus"}).code, cli::kUsage);
    EXPECT_EQ(run({"gen-data", "toy-linear", "--out", path("a.csv"), "--nope"}).code, cli::kUsage);
    EXPECT_EQ(run({"gen-data", "toy-linear"}).code, cli::kUsage);  // --out missing
    EXPECT_EQ(run({"train", "--data", path("missing.csv"), "--out", path("c.json")}).code, cli::kUsage);
    EXPECT_EQ(run({"--help"}).code, cli::kOk);
}

TEST_F(CliTest, GenDataShapes) {
    auto r = run({"gen-data", "pendulum", "--links", "2", "--trajs", "6", "--horizon", "2", "--out", path("p.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    auto ds = data::load_csv(path("p.csv"));
    EXPECT_EQ(ds.trajectories.size(), 6u);
    EXPECT_EQ(ds.dim(), 4u);
    EXPECT_TRUE(fs::exists(data::meta_path(path("p.csv"))));

    r = run({"gen-data", "toy-linear", "--out", path("t.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    ds = data::load_csv(path("t.csv"));
    EXPECT_EQ(ds.trajectories.size(), 2u);
    EXPECT_EQ(ds.dim(), 2u);
    EXPECT_EQ(ds.trajectories[1].states.row(0), Tensor::vector({0.0, -2.0}));

    r = run({"gen-data", "rosenbrock", "--dim", "8", "--horizon", "1", "--out", path("r.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    ds = data::load_csv(path("r.csv"));
    EXPECT_EQ(ds.trajectories.size(), 4u);
    EXPECT_EQ(ds.dim(), 8u);

    EXPECT_EQ(run({"gen-data", "pendulum", "--links", "0", "--out", path("x.csv")}).code, cli::kUsage);
}

TEST_F(CliTest, ResolvedLineReproducesTheRun) {
    const auto r = run({"gen-data", "pendulum", "--horizon", "1", "--seed", "9", "--out", path("a.csv")});
    ASSERT_EQ(r.code, 0);
    auto args = resolved_args(r.out);
    EXPECT_NE(std::find(args.begin(), args.end(), "--damping"), args.end());  // defaults are spelled out
    for (auto& a : args)
        if (a == path("a.csv")) a = path("b.csv");
    ASSERT_EQ(run(args).code, 0);
    EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
}

TEST_F(CliTest, SeedFallsBackToEnvironment) {
    setenv("ELCD_SEED", "5", 1);
    auto r = run({"gen-data", "pendulum", "--horizon", "1", "--out", path("env.csv")});
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("--seed 5"), std::string::npos) << r.out;
    unsetenv("ELCD_SEED");
    ASSERT_EQ(run({"gen-data", "pendulum", "--horizon", "1", "--seed", "5", "--out", path("flag.csv")}).code, 0);
    EXPECT_EQ(slurp(path("env.csv")), slurp(path("flag.csv")));
    setenv("ELCD_SEED", "abc", 1);
    EXPECT_EQ(run({"gen-data", "toy-linear", "--out", path("x.csv")}).code, cli::kUsage);
}

TEST_F(CliTest, ComposeWithItselfDuplicates) {
    ASSERT_EQ(run({"gen-data", "toy-linear", "--out", path("t.csv")}).code, 0);
    const auto r = run({"compose", "--inputs", path("t.csv"), path("t.csv"), "--out", path("c.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto t = data::load_csv(path("t.csv"));
    const auto c = data::load_csv(path("c.csv"));
    ASSERT_EQ(c.dim(), 4u);
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& a = t.trajectories[i];
        const auto& b = c.trajectories[i];
        ASSERT_EQ(b.length(), a.length());
        for (std::size_t k = 0; k < a.length(); ++k) {
            EXPECT_NEAR(b.times[k], a.times[k], 1e-12);
            for (std::size_t j = 0; j < 2; ++j) {
                // Both halves are the same resampled curve; against the input only up to grid rounding.
                EXPECT_EQ(b.states.at(k, j + 2), b.states.at(k, j));
                EXPECT_EQ(b.velocities.at(k, j + 2), b.velocities.at(k, j));
                EXPECT_NEAR(b.states.at(k, j), a.states.at(k, j), 1e-12);
                EXPECT_NEAR(b.velocities.at(k, j), a.velocities.at(k, j), 1e-12);
            }
        }
    }
}

TEST_F(CliTest, ComposeResamplesToCommonGrid) {
    ASSERT_EQ(run({"gen-data", "toy-linear", "--dt", "0.01", "--horizon", "2", "--out", path("a.csv")}).code, 0);
    ASSERT_EQ(run({"gen-data", "toy-linear", "--dt", "0.025", "--horizon", "1.5", "--out", path("b.csv")}).code, 0);
    ASSERT_EQ(run({"compose", "--inputs", path("a.csv"), path("b.csv"), "--out", path("c.csv")}).code, 0);
    const auto c = data::load_csv(path("c.csv"));
    const auto a = data::load_csv(path("a.csv"));
    const auto b = data::load_csv(path("b.csv"));
    const auto& t = c.trajectories[0];
    ASSERT_EQ(t.length(), b.trajectories[0].length());  // shortest input
    for (std::size_t k = 0; k < t.length(); ++k) {
        const double grid = 1.5 * static_cast<double>(k) / static_cast<double>(t.length() - 1);
        EXPECT_NEAR(t.times[k], grid, 1e-12);
        // First input linearly interpolated at the grid time.
        const auto& src = a.trajectories[0];
        std::size_t j = 0;
        while (j + 2 < src.length() && src.times[j + 1] <= grid) ++j;
        const double w = (grid - src.times[j]) / (src.times[j + 1] - src.times[j]);
        for (std::size_t d = 0; d < 2; ++d) {
            EXPECT_NEAR(t.states.at(k, d), (1 - w) * src.states.at(j, d) + w * src.states.at(j + 1, d), 1e-12);
        }
    }
}

TEST_F(CliTest, ComposeRejectsMismatchedCounts) {
    ASSERT_EQ(run({"gen-data", "toy-linear", "--out", path("t.csv")}).code, 0);
    ASSERT_EQ(run({"gen-data", "pendulum", "--horizon", "1", "--out", path("p.csv")}).code, 0);
    EXPECT_EQ(run({"compose", "--inputs", path("t.csv"), path("p.csv"), "--out", path("c.csv")}).code, cli::kUsage);
}

TEST_F(CliTest, TrainZeroEpochsAndDeterminism) {
    ASSERT_EQ(run({"gen-data", "toy-linear", "--out", path("t.csv")}).code, 0);
    auto r = run({"train", "--data", path("t.csv"), "--epochs", "0", "--out", path("init.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto init = train::load_checkpoint(path("init.json"));
    EXPECT_EQ(init.train_config.at("epochs"), 0);
    EXPECT_EQ(init.model->kind(), model::ModelKind::Elcd);

    const std::vector<std::string> args{"train", "--data", path("t.csv"), "--max-steps", "15", "--flow-hidden", "8",
                                        "--seed", "4", "--quiet", "--out"};
    auto a = args, b = args;
    a.push_back(path("a.json"));
    b.push_back(path("b.json"));
    ASSERT_EQ(run(a).code, 0);
    ASSERT_EQ(run(b).code, 0);
    EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
    EXPECT_NE(slurp(path("a.json")), slurp(path("init.json")));
}

TEST_F(CliTest, TrainDefaultsFollowTheReferenceHyperparameters) {
    ASSERT_EQ(run({"gen-data", "toy-linear", "--out", path("t.csv")}).code, 0);
    const auto r = run({"train", "--data", path("t.csv"), "--epochs", "0", "--out", path("c.json")});
    const auto args = resolved_args(r.out);
    const auto value = [&](const std::string& flag) {
        return *(std::find(args.begin(), args.end(), flag) + 1);
    };
    EXPECT_EQ(value("--batch"), "100");
    EXPECT_EQ(value("--lr"), "0.001");
    EXPECT_EQ(value("--model"), "elcd");
    EXPECT_EQ(run({"train", "--data", path("t.csv"), "--model", "lstm", "--out", path("c.json")}).code, cli::kUsage);
}

TEST_F(CliTest, RolloutFromEquilibriumIsStationary) {
    ASSERT_EQ(run({"gen-data", "toy-linear", "--out", path("t.csv")}).code, 0);
    ASSERT_EQ(run({"train", "--data", path("t.csv"), "--epochs", "0", "--out", path("c.json")}).code, 0);
    const auto ck = train::load_checkpoint(path("c.json"));
    const Tensor eq = ck.standardization.invert_states(ck.model->equilibrium().reshaped(Shape{1, 2})).row(0);
    char x0[128];
    std::snprintf(x0, sizeof x0, "%.17g,%.17g", eq[0], eq[1]);
    const auto r = run({"rollout", "--ckpt", path("c.json"), "--x0", x0, "--horizon", "1", "--out", path("r.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto t = data::load_csv(path("r.csv")).trajectories.front();
    EXPECT_EQ(t.length(), 101u);
    for (std::size_t k = 0; k < t.length(); ++k) {
        EXPECT_NEAR(t.states.at(k, 0), eq[0], 1e-15);
        EXPECT_NEAR(t.states.at(k, 1), eq[1], 1e-15);
    }
}

TEST_F(CliTest, RolloutOfExactToyMatchesClosedForm) {
    save_exact_toy(path("toy.json"));
    const auto r = run({"rollout", "--ckpt", path("toy.json"), "--x0", "0,2", "--horizon", "5", "--out", path("r.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto t = data::load_csv(path("r.csv")).trajectories.front();
    for (std::size_t k = 0; k < t.length(); ++k) {
        const Tensor exact = data::toy_linear_state(Tensor::vector({0.0, 2.0}), t.times[k]);
        EXPECT_NEAR(t.states.at(k, 0), exact[0], 1e-8);
        EXPECT_NEAR(t.states.at(k, 1), exact[1], 1e-8);
    }
    EXPECT_EQ(run({"rollout", "--ckpt", path("toy.json"), "--x0", "1,2,3", "--out", path("x.csv")}).code, cli::kUsage);
    EXPECT_EQ(run({"rollout", "--ckpt", path("toy.json"), "--out", path("x.csv")}).code, cli::kUsage);
}

TEST_F(CliTest, DivergentRolloutReportsTheStep) {
    save_exact_toy(path("toy.json"));
    // Forward Euler far outside its stability region.
    const auto r = run({"rollout", "--ckpt", path("toy.json"), "--x0", "0,2", "--integrator", "euler", "--dt", "100",
                        "--horizon", "100000", "--out", path("r.csv")});
    EXPECT_EQ(r.code, cli::kNumerical);
    EXPECT_TRUE(std::regex_search(r.err, std::regex("at step [0-9]+"))) << r.err;
}

TEST_F(CliTest, DivergentBaselineRollout) {
    ASSERT_EQ(run({"gen-data", "toy-linear", "--out", path("t.csv")}).code, 0);
    ASSERT_EQ(run({"train", "--data", path("t.csv"), "--model", "ncds", "--epochs", "0", "--out", path("n.json")}).code, 0);
    const auto r = run({"rollout", "--ckpt", path("n.json"), "--x0", "0,2", "--integrator", "euler", "--dt", "1000",
                        "--horizon", "1000000", "--out", path("r.csv")});
    EXPECT_EQ(r.code, cli::kNumerical) << r.out << r.err;
    EXPECT_NE(r.err.find("step"), std::string::npos) << r.err;
}

TEST_F(CliTest, EvalPerfectModel) {
    ASSERT_EQ(run({"gen-data", "toy-linear", "--out", path("toy.csv")}).code, 0);
    save_exact_toy(path("toy.json"));
    const auto r = run({"eval", "--ckpt", path("toy.json"), "--data", path("toy.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("elcd toy: 0.00 ± 0.00"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("\nmodel,dataset,mean,std,n\nelcd,toy,"), std::string::npos) << r.out;
    EXPECT_TRUE(std::regex_search(r.out, std::regex(R"(\nelcd,toy,[-+.e0-9]+,[-+.e0-9]+,2\n)"))) << r.out;
}

TEST_F(CliTest, EvalPoolsRunsAndStdMatchesRecomputation) {
    ASSERT_EQ(run({"gen-data", "toy-linear", "--out", path("toy.csv")}).code, 0);
    for (const char* seed : {"1", "2"}) {
        ASSERT_EQ(run({"train", "--data", path("toy.csv"), "--max-steps", "30", "--flow-hidden", "8", "--seed", seed,
                       "--quiet", "--out", path(std::string("c") + seed + ".json")})
                      .code,
                  0);
    }
    const auto r = run({"eval", "--ckpt", path("c1.json"), path("c2.json"), "--data", path("toy.csv"), "--name", "t"});
    ASSERT_EQ(r.code, 0) << r.err;

    std::vector<double> scores;
    for (const char* f : {"c1.json", "c2.json"}) {
        const auto ck = train::load_checkpoint(path(f));
        data::Dataset ds = data::trim_initial(data::load_csv(path("toy.csv")), 5);
        for (auto& t : ds.trajectories) {
            const auto rolled = rollout::integrate(ck.model->field(), ck.standardization.apply_states(t.states).row(0),
                                                   {rollout::Scheme::Rk4, 0.01, t.duration()});
            scores.push_back(rollout::dtwd(ck.standardization.apply_states(t.states), rolled.states));
        }
    }
    double mean = 0.0, var = 0.0;
    for (double s : scores) mean += s / 4.0;
    for (double s : scores) var += (s - mean) * (s - mean) / 4.0;
    std::smatch m;
    ASSERT_TRUE(std::regex_search(r.out, m, std::regex(R"(\nelcd,t,([^,]+),([^,]+),4\n)"))) << r.out;
    EXPECT_NEAR(std::stod(m[1]), mean, 1e-12);
    EXPECT_NEAR(std::stod(m[2]), std::sqrt(var), 1e-12);
}

TEST_F(CliTest, EvalRetrainsPerRun) {
    ASSERT_EQ(run({"gen-data", "toy-linear", "--out", path("toy.csv")}).code, 0);
    ASSERT_EQ(run({"train", "--data", path("toy.csv"), "--max-steps", "10", "--pattern", "linear", "--quiet", "--out",
                   path("c.json")})
                  .code,
              0);
    const auto r = run({"eval", "--ckpt", path("c.json"), "--data", path("toy.csv"), "--runs", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("run 2 seed 2"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find(",6\n"), std::string::npos) << r.out;
}

TEST_F(CliTest, VerifyFreshModelPassesLatentChecks) {
    ASSERT_EQ(run({"gen-data", "toy-linear", "--out", path("toy.csv")}).code, 0);
    ASSERT_EQ(run({"train", "--data", path("toy.csv"), "--epochs", "0", "--alpha", "0.5", "--out", path("c.json")}).code,
              0);
    const auto r = run({"verify", "--ckpt", path("c.json"), "--samples", "3", "--rollouts", "5", "--csv",
                        path("v.csv")});
    EXPECT_EQ(r.code, cli::kOk) << r.out << r.err;
    EXPECT_NE(r.out.find("space: latent"), std::string::npos);
    for (const char* check : {"equilibrium bound", "metric positive definite", "metric residual", "contraction at rate"}) {
        EXPECT_TRUE(std::regex_search(r.out, std::regex(std::string("PASS ") + check + ".*tol [0-9.e+-]+"))) << r.out;
    }
    EXPECT_EQ(count(slurp(path("v.csv")), "\n"), 4u);  // header and one row per sample
    EXPECT_EQ(run({"verify", "--ckpt", path("c.json"), "--space", "nowhere"}).code, cli::kUsage);
}

TEST_F(CliTest, VerifyFailureExitCode) {
    ASSERT_EQ(run({"gen-data", "toy-linear", "--out", path("toy.csv")}).code, 0);
    ASSERT_EQ(run({"train", "--data", path("toy.csv"), "--epochs", "0", "--alpha", "0.5", "--out", path("c.json")}).code,
              0);
    // A rate above what the model achieves cannot be certified.
    const auto r = run({"verify", "--ckpt", path("c.json"), "--samples", "2", "--rollouts", "3", "--c", "5"});
    EXPECT_EQ(r.code, cli::kVerifyFailed) << r.out << r.err;
    EXPECT_NE(r.out.find("FAIL contraction at rate 5"), std::string::npos) << r.out;
    ASSERT_EQ(run({"train", "--data", path("toy.csv"), "--model", "sdd", "--epochs", "0", "--out", path("s.json")}).code,
              0);
    EXPECT_EQ(run({"verify", "--ckpt", path("s.json"), "--space", "latent"}).code, cli::kUsage);
}

TEST_F(CliTest, PlotContracts) {
    ASSERT_EQ(run({"gen-data", "toy-linear", "--out", path("toy.csv")}).code, 0);
    save_exact_toy(path("toy.json"));
    auto r = run({"plot", "--data", path("toy.csv"), "--ckpt", path("toy.json"), "--grid", "20", "--out", path("a.svg")});
    ASSERT_EQ(r.code, 0) << r.err;
    std::string svg = slurp(path("a.svg"));
    EXPECT_TRUE(well_formed(svg));
    EXPECT_EQ(count(svg, "class=\"arrow\""), 400u);
    EXPECT_EQ(count(svg, "<polyline"), 2u);
    EXPECT_EQ(count(svg, "class=\"rollout\""), 2u);

    r = run({"plot", "--data", path("toy.csv"), "--out", path("b.svg")});
    ASSERT_EQ(r.code, 0);
    svg = slurp(path("b.svg"));
    EXPECT_TRUE(well_formed(svg));
    EXPECT_EQ(count(svg, "class=\"arrow\""), 0u);
    EXPECT_EQ(count(svg, "<polyline"), 2u);

    EXPECT_EQ(run({"plot", "--data", path("toy.csv"), "--dims", "0,2", "--out", path("c.svg")}).code, cli::kUsage);
    EXPECT_EQ(run({"plot", "--data", path("toy.csv"), "--dims", "1,1", "--out", path("c.svg")}).code, cli::kUsage);
}

TEST(Plot, ArrowsHaveEqualLengthUnlessRaw) {
    const data::Dataset toy = data::gen_toy_linear(0.05, 3.0);
    const auto m = tu::toy_exact_model();
    auto lengths = [&](bool raw) {
        cli::PlotOptions opts;
        opts.grid = 5;
        opts.raw_arrows = raw;
        opts.rollouts = false;
        const std::string svg = cli::render_svg(toy, &m, data::Standardization::identity(2), opts);
        std::vector<double> out;
        const std::regex arrow(R"(class="arrow" d="M([-0-9.]+) ([-0-9.]+) L([-0-9.]+) ([-0-9.]+))");
        for (auto it = std::sregex_iterator(svg.begin(), svg.end(), arrow); it != std::sregex_iterator(); ++it) {
            out.push_back(std::hypot(std::stod((*it)[3]) - std::stod((*it)[1]), std::stod((*it)[4]) - std::stod((*it)[2])));
        }
        return out;
    };
    const auto eq = lengths(false);
    ASSERT_EQ(eq.size(), 25u);
    // The field vanishes only at the equilibrium, which can sit on a cell center.
    const double full = *std::max_element(eq.begin(), eq.end());
    EXPECT_LE(std::count(eq.begin(), eq.end(), 0.0), 1);
    for (double l : eq)
        if (l > 0.0) EXPECT_NEAR(l, full, 0.02);
    const auto raw = lengths(true);
    ASSERT_EQ(raw.size(), 25u);
    EXPECT_GT(*std::max_element(raw.begin(), raw.end()), 3.0 * *std::min_element(raw.begin(), raw.end()));
}

TEST(Plot, RejectsLowDimensionalData) {
    std::vector<data::Trajectory> ts(1);
    ts[0].times = {0.0, 1.0};
    ts[0].states = Tensor::matrix(2, 1, {1.0, 0.5});
    ts[0].velocities = Tensor::matrix(2, 1, {-1.0, -0.5});
    EXPECT_THROW(cli::render_svg(data::make_dataset(ts), nullptr, data::Standardization::identity(1), {}),
                 ConfigError);
}
