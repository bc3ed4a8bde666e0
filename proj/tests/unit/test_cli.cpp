#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"
#include "stla/config.hpp"
#include "stla/error.hpp"
#include "stla/report.hpp"

using namespace stla;
namespace fs = std::filesystem;

namespace {

std::string config_path(const std::string& name) { return std::string(STLA_CONFIG_DIR) + "/" + name + ".json"; }

cli::AnalysisConfig example(const std::string& name) { return cli::load_config(config_path(name)); }

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("stla_test_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(STLA_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("certify report for the axis example") {
    const auto report = cli::run(example("ex6_axis"));
    CHECK(report.exit_code == 0);
    REQUIRE(report.certificates.size() == 2);
    CHECK(report.certificates[0].certified);
    CHECK(report.certificates[0].k_bar == 2);
    CHECK(report.certificates[0].theorem == "manifold");
    CHECK(report.certificates[1].theorem == "corollary-restricted");
    const auto j = nlohmann::json::parse(report.json);
    CHECK(j["exit_code"] == 0);
    CHECK(j["results"][0]["task"] == "certify");
    CHECK(j["results"][0]["targets"][0]["points"][0]["k_bar"] == 2);
}

TEST_CASE("first-order groups only: exit code 2") {
    const auto report = cli::run(example("ex2_first_order"));
    CHECK(report.exit_code == 2);
    REQUIRE_FALSE(report.certificates.empty());
    CHECK_FALSE(report.certificates[0].certified);
    REQUIRE(report.certificates[0].failure.has_value());
    CHECK(*report.certificates[0].failure == ErrorKind::NoGroupQualifies);
}

TEST_CASE("errors inside a task give exit code 1") {
    // A reach start far outside the basin fails with NotInBasin.
    auto cfg = example("ex7_curve");
    cfg.reach.starts = {Eigen::Vector3d(0.45, 0.0, 0.0)};
    const auto report = cli::run(cfg, {cli::Task::Certify, cli::Task::Reach});
    CHECK(report.exit_code == 1);
    const auto j = nlohmann::json::parse(report.json);
    REQUIRE_FALSE(j["errors"].empty());
}

TEST_CASE("reports are deterministic") {
    const auto cfg = example("ex7_curve");
    const auto a = cli::run(cfg);
    const auto b = cli::run(cfg);
    CHECK(a.json == b.json);
    CHECK(a.text == b.text);
    REQUIRE(a.artifacts.size() == b.artifacts.size());
    for (std::size_t i = 0; i < a.artifacts.size(); ++i) CHECK(a.artifacts[i].content == b.artifacts[i].content);
}

TEST_CASE("written artifacts and CSV headers") {
    const auto dir = scratch("artifacts");
    const auto report = cli::run(example("ex7_curve"));
    cli::write_report(report, dir.string());
    CHECK(fs::exists(dir / "report.json"));
    CHECK(fs::exists(dir / "report.txt"));
    CHECK(slurp(dir / "report.json") == report.json);
    const auto reach = slurp(dir / "reach.csv");
    CHECK(reach.substr(0, reach.find('\n')) == "index,x1,x2,x3,T_est,residual,reached");
    const auto traj = slurp(dir / "reach_trajectory_0.csv");
    CHECK(traj.substr(0, traj.find('\n')) == "t,x1,x2,x3");
    fs::remove_all(dir);
}

TEST_CASE("unwritable output directory") {
    cli::Report r;
    r.json = "{}";
    try {
        cli::write_report(r, "/proc/stla_cannot_write_here");
        FAIL("expected Io");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Io);
    }
}

TEST_CASE("command line exit codes") {
    CHECK(run_cli("certify --config " + config_path("ex6_axis")) == 0);
    CHECK(run_cli("certify --config " + config_path("ex2_first_order")) == 2);
    CHECK(run_cli("certify --config /nonexistent.json") != 0);
    CHECK(run_cli("certify") != 0);
    CHECK(run_cli("reach --config " + config_path("ex6_axis")) == 1);

    const auto dir = scratch("bad_config");
    fs::create_directories(dir);
    {
        std::ofstream(dir / "bad.json") << R"({"system": {"variables": ["x"], "fields": [{"name": "f", "components": ["1", "2"]}]}})";
    }
    CHECK(run_cli("certify --config " + (dir / "bad.json").string()) == 1);
    fs::remove_all(dir);
}

TEST_CASE("command line reports are byte-identical across runs") {
    const auto a = scratch("det_a"), b = scratch("det_b");
    CHECK(run_cli("run --config " + config_path("ex3_coron") + " --out " + a.string()) == 0);
    CHECK(run_cli("run --config " + config_path("ex3_coron") + " --out " + b.string()) == 0);
    for (const auto& entry : fs::directory_iterator(a)) {
        CAPTURE(entry.path().filename().string());
        CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
    }
    fs::remove_all(a);
    fs::remove_all(b);
}
