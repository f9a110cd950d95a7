#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bsde/cli.hpp"
#include "bsde/csv.hpp"
#include "bsde/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("bsde_cli_test_" + std::to_string(std::rand()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

fs::path write_config(const TempDir& dir, const json& config, const char* name = "config.json") {
    const fs::path p = dir.path / name;
    std::ofstream os(p);
    os << config.dump(2);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

json envelope_config() {
    return json{
        {"model", {{"gamma", 0.0}, {"sigma", 1.0}}},
        {"generator", {{"family", "envelope"}, {"params", {{"a", 1.0}, {"k_f", 0.0}}}}},
        {"terminal", {{"family", "constant"}, {"params", {{"c", 1.0}}}}},
        {"solver",
         {{"method", "markov_dp"},
          {"grid", {{"T", 1.0}, {"steps", 100}}},
          {"lattice", {{"min", -2.0}, {"max", 2.0}, {"nodes", 21}}}}},
        {"seed", 42}};
}

} // namespace

TEST_CASE("solve task writes a solution matching the closed form, deterministically") {
    TempDir dir;
    const auto config = write_config(dir, envelope_config());
    const auto out1 = dir.path / "run1";
    const auto out2 = dir.path / "run2";
    CHECK(bsde::cli::run_task(config.string(), out1.string(), std::nullopt, "solve") == 0);
    CHECK(bsde::cli::run_task(config.string(), out2.string(), std::nullopt, "solve") == 0);

    const std::string csv1 = slurp(out1 / "solution.csv");
    CHECK(csv1 == slurp(out2 / "solution.csv")); // byte identical

    std::istringstream is(csv1);
    const auto sol = bsde::read_solution_csv(is);
    CHECK(sol.Y(0, 10) == doctest::Approx(std::exp(1.0)).epsilon(1e-2));

    const auto manifest = json::parse(slurp(out1 / "manifest.json"));
    CHECK(manifest["task"] == "solve");
    CHECK(manifest["seed"] == 42);
    CHECK(manifest["config_hash"].is_string());
    CHECK(!manifest["artifacts"].empty());
}

TEST_CASE("malformed config exits 2 naming the field") {
    TempDir dir;
    json bad = envelope_config();
    bad["model"]["atoms"] = json::array({json::array({1.0, -3.0})}); // negative intensity
    const auto config = write_config(dir, bad);
    CHECK(bsde::cli::run_task(config.string(), (dir.path / "out").string(), std::nullopt,
                              "solve") == 2);
    json missing = envelope_config();
    missing.erase("generator");
    const auto config2 = write_config(dir, missing, "missing.json");
    CHECK(bsde::cli::run_task(config2.string(), (dir.path / "out").string(), std::nullopt,
                              "solve") == 2);
    CHECK(bsde::cli::run_task((dir.path / "nonexistent.json").string(),
                              (dir.path / "out").string(), std::nullopt, "solve") == 2);
    CHECK(bsde::cli::run_task(config.string(), (dir.path / "out").string(), std::nullopt,
                              "no_such_task") == 2);
}

TEST_CASE("verify task catches corrupted solutions with exit 4") {
    TempDir dir;
    // craft a tiny solution whose Y breaks the explicit certificate
    const fs::path bad_csv = dir.path / "bad.csv";
    {
        std::ofstream os(bad_csv);
        os << "t,where,quantity,value\n";
        os << "0,0,Y,50\n0,0,Z,0\n";
        os << "1,0,Y,1\n1,0,Z,0\n";
    }
    json config = envelope_config();
    config["bounds"] = {{"mode", "explicit"}, {"R", 2.0}, {"Q", 2.0}, {"P", 2.0}};
    config["verify"] = {{"input", bad_csv.string()}};
    const auto path = write_config(dir, config);
    CHECK(bsde::cli::run_task(path.string(), (dir.path / "out").string(), std::nullopt,
                              "verify") == 4);

    // the same config without corruption passes
    json good = envelope_config();
    good["bounds"] = {{"mode", "auto"}};
    const auto good_path = write_config(dir, good, "good.json");
    CHECK(bsde::cli::run_task(good_path.string(), (dir.path / "out2").string(),
                              std::nullopt, "verify") == 0);
}

TEST_CASE("simulate and pdie tasks write their artifacts") {
    TempDir dir;
    json config = envelope_config();
    config["solver"]["method"] = "picard_regression";
    config["solver"]["paths"] = 50;
    config["solver"]["grid"]["steps"] = 4;
    const auto path = write_config(dir, config);
    CHECK(bsde::cli::run_task(path.string(), (dir.path / "sim").string(), std::nullopt,
                              "simulate") == 0);
    CHECK(fs::exists(dir.path / "sim" / "paths.csv"));

    json pconfig = envelope_config();
    pconfig["generator"] = {{"family", "linear"}, {"params", {{"alpha", -0.5}}}};
    pconfig["pdie"] = {{"space", {{"min", -3.0}, {"max", 3.0}, {"nodes", 31}}},
                       {"T", 0.5},
                       {"steps", 100},
                       {"cross_validate", true},
                       {"dp_steps", 50}};
    const auto ppath = write_config(dir, pconfig, "pdie.json");
    CHECK(bsde::cli::run_task(ppath.string(), (dir.path / "pd").string(), std::nullopt,
                              "pdie") == 0);
    CHECK(fs::exists(dir.path / "pd" / "pdie.csv"));
    CHECK(fs::exists(dir.path / "pd" / "cross_validation.json"));
}

TEST_CASE("seed override changes stochastic artifacts") {
    TempDir dir;
    json config = envelope_config();
    config["solver"]["method"] = "picard_regression";
    config["solver"]["paths"] = 200;
    config["solver"]["grid"]["steps"] = 5;
    config["solver"]["basis_degree"] = 1;
    const auto path = write_config(dir, config);
    CHECK(bsde::cli::run_task(path.string(), (dir.path / "a").string(), std::nullopt,
                              "solve") == 0);
    CHECK(bsde::cli::run_task(path.string(), (dir.path / "b").string(), 777, "solve") == 0);
    CHECK(slurp(dir.path / "a" / "solution.csv") != slurp(dir.path / "b" / "solution.csv"));
    const auto manifest = json::parse(slurp(dir.path / "b" / "manifest.json"));
    CHECK(manifest["seed"] == 777);
}

TEST_CASE("solution csv round-trips through read_solution_csv") {
    TempDir dir;
    const auto config = write_config(dir, envelope_config());
    const auto out = dir.path / "rt";
    REQUIRE(bsde::cli::run_task(config.string(), out.string(), std::nullopt, "solve") == 0);
    const std::string csv = slurp(out / "solution.csv");
    std::istringstream is(csv);
    const auto sol = bsde::read_solution_csv(is);
    std::ostringstream os;
    bsde::write_solution_csv(os, sol);
    CHECK(os.str() == csv);
}

TEST_CASE("hlimit and malliavin tasks run end to end; non-convergence exits 3") {
    TempDir dir;
    json config = envelope_config();
    config["model"]["atoms"] = json::array({json::array({0.2, 1.0})});
    config["generator"] = {{"family", "linear"}, {"params", {{"alpha", 0.5}}}};
    config["terminal"] = {{"family", "tanh"}, {"params", {{"scale", 1.0}}}};
    config["solver"] = {{"method", "picard_regression"},
                        {"grid", {{"T", 1.0}, {"steps", 8}}},
                        {"paths", 400},
                        {"basis_degree", 1},
                        {"tol", 1e-7},
                        {"max_iter", 40}};
    config["hlimit"] = {{"alpha", 1.0}, {"schedule", {2, 4, 8, 16, 32}},
                        {"cauchy_tol", 1e-3}};
    const auto hpath = write_config(dir, config, "hlimit.json");
    CHECK(bsde::cli::run_task(hpath.string(), (dir.path / "h").string(), std::nullopt,
                              "hlimit") == 0);
    CHECK(fs::exists(dir.path / "h" / "hlimit_table.csv"));

    json stuck = config;
    stuck["hlimit"] = {{"alpha", 1.0}, {"schedule", {2, 3}}, {"cauchy_tol", 1e-18}};
    const auto spath = write_config(dir, stuck, "stuck.json");
    CHECK(bsde::cli::run_task(spath.string(), (dir.path / "s").string(), std::nullopt,
                              "hlimit") == 3);

    json mconfig = config;
    mconfig["terminal"] = {{"family", "terminal_value"}};
    mconfig["malliavin"] = {{"directions", "diagonal"}, {"nodes", {2, 4}}};
    const auto mpath = write_config(dir, mconfig, "malliavin.json");
    CHECK(bsde::cli::run_task(mpath.string(), (dir.path / "m").string(), std::nullopt,
                              "malliavin") == 0);
    CHECK(fs::exists(dir.path / "m" / "malliavin_report.json"));
    const auto report = json::parse(slurp(dir.path / "m" / "malliavin_report.json"));
    CHECK(report.contains("u_errors"));
}

TEST_CASE("stochastic solves are byte-identical under the same seed") {
    TempDir dir;
    json config = envelope_config();
    config["model"]["atoms"] = json::array({json::array({0.5, 1.0})});
    config["solver"] = {{"method", "picard_regression"},
                        {"grid", {{"T", 1.0}, {"steps", 10}}},
                        {"paths", 1000},
                        {"basis_degree", 2},
                        {"tol", 1e-8},
                        {"max_iter", 30}};
    const auto path = write_config(dir, config);
    REQUIRE(bsde::cli::run_task(path.string(), (dir.path / "r1").string(), std::nullopt,
                                "solve") == 0);
    REQUIRE(bsde::cli::run_task(path.string(), (dir.path / "r2").string(), std::nullopt,
                                "solve") == 0);
    CHECK(slurp(dir.path / "r1" / "solution.csv") == slurp(dir.path / "r2" / "solution.csv"));
}
