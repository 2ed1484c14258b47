#include "sdpuf/commands.hpp"
#include "sdpuf/config.hpp"
#include "sdpuf/error.hpp"
#include "sdpuf/io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace sdpuf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("sdpuf_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig small_config()
{
    RunConfig c;
    c.rows = 8;
    c.cols = 8;
    c.n_trials = 200;
    c.workers = 1;
    return c;
}

int run(const std::string& args)
{
    const std::string cmd = std::string(SDPUF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("config round trip")
{
    RunConfig c;
    c.seed = 42;
    c.rows = 3;
    c.mismatch.sigma_vth_n = 0.011;
    c.ramp.shape = RampShape::Linear;
    c.fit.objective = FitObjective::Histogram;
    c.threshold_probabilities = {0.97};
    const RunConfig back = config_from_json(config_to_json(c));
    CHECK(config_to_json(back) == config_to_json(c));
    CHECK(back.seed == 42);
    CHECK(back.ramp.shape == RampShape::Linear);
    CHECK(back.mismatch.sigma_vth_n == 0.011);

    CHECK(config_from_json("{}").rows == RunConfig{}.rows);
}

TEST_CASE("config errors name the offending key")
{
    try {
        config_from_json(R"({"device": {"nmos": {"widht": 1}}})");
        FAIL("expected MALFORMED");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Malformed);
        CHECK(std::string(e.what()).find("device.nmos.widht") != std::string::npos);
    }
    CHECK_THROWS_AS(config_from_json(R"({"seed": "one"})"), Error);
    CHECK_THROWS_AS(config_from_json(R"({"rows": 0})"), Error);
    CHECK_THROWS_AS(config_from_json(R"({"ramp": {"shape": "sine"}})"), Error);
    CHECK_THROWS_AS(config_from_json("[1, 2"), Error);
}

TEST_CASE("exit codes by category")
{
    CHECK(exit_code(ErrorCode::Malformed) == 2);
    CHECK(exit_code(ErrorCode::InvalidArgument) == 2);
    CHECK(exit_code(ErrorCode::NoConvergence) == 3);
    CHECK(exit_code(ErrorCode::Io) == 4);
}

TEST_CASE("pipeline on a small memory")
{
    const RunConfig c = small_config();
    const fs::path dir = scratch("pipeline");
    const auto pop = cmd_population(c, dir.string());
    const auto pj = nlohmann::json::parse(pop.summary_json);
    CHECK(pj["cells"] == 64);
    CHECK(fs::exists(dir / "sd.csv"));
    CHECK(read_sd_csv((dir / "sd.csv").string()).size() == 64);

    StartupOptions so;
    so.reads = 2;
    const auto st = cmd_startup(c, so, dir.string());
    const auto sj = nlohmann::json::parse(st.summary_json);
    CHECK(sj["cells"] == 64);
    const double a0 = sj["regions"]["A0"], b = sj["regions"]["B"], a1 = sj["regions"]["A1"];
    CHECK(a0 + b + a1 == doctest::Approx(1.0));
    CHECK(fs::exists(dir / "responses.csv"));

    const auto fit = cmd_fit(c, (dir / "sd.csv").string(), (dir / "counts.csv").string(), dir.string());
    CHECK(fs::exists(dir / "model_double.json"));
    const auto th = cmd_thresholds((dir / "model_double.json").string(), {0.95, 0.9}, (dir / "sd.csv").string(),
                                   1.2, dir.string());
    CHECK(read_threshold_csv((dir / "thresholds.csv").string()).size() == 2);

    const auto m = cmd_metrics({(dir / "responses.csv").string()}, dir.string());
    const auto mj = nlohmann::json::parse(m.summary_json);
    CHECK(mj["metrics"]["reliability"]["value"].is_number());
    fs::remove_all(dir);
}

TEST_CASE("worker count does not change results")
{
    RunConfig c = small_config();
    const fs::path a = scratch("w1"), b = scratch("w4");
    cmd_population(c, a.string());
    cmd_startup(c, {}, a.string());
    c.workers = 4;
    cmd_population(c, b.string());
    cmd_startup(c, {}, b.string());
    for (const char* f : {"sd.csv", "counts.csv", "population.csv"})
        CHECK(slurp(a / f) == slurp(b / f));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("command-line exit status")
{
    const fs::path dir = scratch("exe");
    CHECK(run("--help") == 0);
    CHECK(run("nonsense") == 2);
    CHECK(run("population --rows 0") == 2);

    std::ofstream(dir / "bad.json") << R"({"typo": 1})";
    CHECK(run("population --config " + (dir / "bad.json").string()) == 2);

    std::ofstream(dir / "bad.csv") << "cell_id,n_ones,n_trials\n0,5\n";
    CHECK(run("startup --ingest " + (dir / "bad.csv").string() + " --out " + dir.string()) == 2);
    CHECK(run("thresholds --model " + (dir / "missing.json").string() + " --out " + dir.string()) == 4);

    CHECK(run("population --rows 4 --cols 4 --workers 1 --out " + dir.string()) == 0);
    CHECK(fs::exists(dir / "sd.csv"));
    fs::remove_all(dir);
}
