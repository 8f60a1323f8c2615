// End-to-end tests for the command-line tool: each case writes a config file,
// runs the real binary, and checks exit code and emitted bytes.

#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

using json = nlohmann::json;

struct RunResult {
    int exit_code = -1;
    std::string output;
};

std::string temp_path(const std::string& stem) {
    return std::string(HAMGEO_TEST_TMPDIR) + "/" + stem;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    REQUIRE(f.good());
    f << text;
}

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(HAMGEO_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult r;
    std::array<char, 4096> buf;
    size_t got;
    while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), got);
    int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

RunResult run_config(const std::string& stem, const std::string& config_text,
                     const std::string& extra_args = "") {
    const std::string path = temp_path(stem + ".json");
    write_file(path, config_text);
    return run_cli("--config " + path + (extra_args.empty() ? "" : " " + extra_args));
}

} // namespace

TEST_CASE("curvature command reproduces the oscillator Ricci value") {
    RunResult r = run_config("cli_sho", R"({
        "schema": 1,
        "model": {"family": "sho", "omega": [2.0]},
        "command": {"name": "curvature", "q": [0.0], "p": [0.0]}
    })");
    REQUIRE(r.exit_code == 0);
    json out = json::parse(r.output);
    CHECK(out["schema"] == 1);
    CHECK(out["command"] == "curvature");
    CHECK(out["R"][0][0].get<double>() == 4.0);
    CHECK(out["ricci"].get<double>() == 4.0);
    // exact decimal in the raw bytes, per the output contract
    CHECK(r.output.find("\"ricci\": 4.0") != std::string::npos);
}

TEST_CASE("eikonal command recovers the free-particle distance") {
    RunResult r = run_config("cli_free", R"({
        "schema": 1,
        "model": {"family": "free", "n": 1},
        "command": {"name": "eikonal", "start": [0.0], "end": [1.0], "energy": 0.5}
    })");
    REQUIRE(r.exit_code == 0);
    json out = json::parse(r.output);
    CHECK(out["sigma"].get<double>() == Catch::Approx(1.0).epsilon(1e-7));
    CHECK(out["t_star"].get<double>() == Catch::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("malformed JSON fails with exit 2 and a structured error") {
    RunResult r = run_config("cli_bad", R"({"schema": 1, "model": {)");
    CHECK(r.exit_code == 2);
    json out = json::parse(r.output);
    CHECK(out["error"] == "ConfigInvalid");
    CHECK(out.contains("detail"));
    CHECK(out.contains("location"));
}

TEST_CASE("config validation reports the offending path") {
    SECTION("unknown top-level field") {
        RunResult r = run_config("cli_unknown", R"({
            "schema": 1, "command": {"name": "verify"}, "bogus": 3
        })");
        CHECK(r.exit_code == 2);
        json out = json::parse(r.output);
        CHECK(out["error"] == "ConfigInvalid");
        CHECK(out["location"] == "$.bogus");
    }
    SECTION("wrong schema version") {
        RunResult r = run_config("cli_schema", R"({"schema": 7, "command": {"name": "verify"}})");
        CHECK(r.exit_code == 2);
        CHECK(json::parse(r.output)["location"] == "$.schema");
    }
    SECTION("model dimension mismatch") {
        RunResult r = run_config("cli_dim", R"({
            "schema": 1,
            "model": {"family": "sho", "omega": [1.0]},
            "command": {"name": "curvature", "q": [0.0, 0.0], "p": [0.0, 0.0]}
        })");
        CHECK(r.exit_code == 2);
        CHECK(json::parse(r.output)["error"] == "ConfigInvalid");
    }
    SECTION("both energy and time for eikonal") {
        RunResult r = run_config("cli_both", R"({
            "schema": 1,
            "model": {"family": "free", "n": 1},
            "command": {"name": "eikonal", "start": [0.0], "end": [1.0],
                        "energy": 0.5, "time": 1.0}
        })");
        CHECK(r.exit_code == 2);
        CHECK(json::parse(r.output)["location"] == "$.command");
    }
    SECTION("missing config file") {
        RunResult r = run_cli("--config " + temp_path("does_not_exist.json"));
        CHECK(r.exit_code == 2);
        CHECK(json::parse(r.output)["error"] == "ConfigInvalid");
    }
    SECTION("unknown CLI flag") {
        RunResult r = run_cli("--config x.json --frobnicate");
        CHECK(r.exit_code == 2);
        CHECK(json::parse(r.output)["error"] == "ConfigInvalid");
    }
}

TEST_CASE("compute failures surface as named error objects with exit 1") {
    // bilinear p*q has a singular momentum Hessian: convexity guard trips
    RunResult r = run_config("cli_notconvex", R"({
        "schema": 1,
        "model": {"expression": "p1*q1", "n": 1},
        "command": {"name": "curvature", "q": [0.5], "p": [0.5]}
    })");
    CHECK(r.exit_code == 1);
    json out = json::parse(r.output);
    CHECK(out["error"] == "NotConvex");
    CHECK(out["detail"].get<std::string>().find("positive-definite") != std::string::npos);
}

TEST_CASE("verify output is byte-identical across reruns with one seed") {
    const std::string cfg = R"({"schema": 1, "command": {"name": "verify"}, "seed": 11})";
    RunResult a = run_config("cli_verify_a", cfg);
    RunResult b = run_config("cli_verify_b", cfg);
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    CHECK(a.output == b.output);

    json out = json::parse(a.output);
    CHECK(out["total"].get<int>() == 10);
    CHECK(out["failed"].get<int>() == 0);
    CHECK(out["passed"].get<bool>());

    // a different seed still passes but samples different points
    RunResult c = run_config("cli_verify_c",
                             R"({"schema": 1, "command": {"name": "verify"}, "seed": 12})");
    REQUIRE(c.exit_code == 0);
    CHECK(c.output != a.output);

    // worker threads must not change the bytes
    RunResult d = run_config("cli_verify_d", cfg, "--threads 4");
    REQUIRE(d.exit_code == 0);
    CHECK(d.output == a.output);
}

TEST_CASE("verify filter selects a named subset") {
    RunResult r = run_config("cli_verify_filter",
                             R"({"schema": 1, "command": {"name": "verify"}})",
                             "--filter magnetic");
    REQUIRE(r.exit_code == 0);
    json out = json::parse(r.output);
    CHECK(out["total"].get<int>() >= 1);
    CHECK(out["total"].get<int>() < 10);
    for (const auto& c : out["cases"]) {
        const std::string name = c["name"].get<std::string>();
        const std::string tags = c["tags"].get<std::string>();
        CHECK((name + " " + tags).find("magnetic") != std::string::npos);
    }
}

TEST_CASE("verify with an impossible tolerance reports failures and exit 1") {
    RunResult r = run_config("cli_verify_tight", R"({
        "schema": 1, "command": {"name": "verify", "tolerance": 1e-15}
    })");
    CHECK(r.exit_code == 1);
    json out = json::parse(r.output);
    CHECK(out["failed"].get<int>() > 0);
    CHECK_FALSE(out["passed"].get<bool>());
    for (const auto& c : out["cases"]) CHECK(c["tolerance"].get<double>() == 1e-15);
}

TEST_CASE("trajectory command emits CSV with conserved energy") {
    RunResult r = run_config("cli_traj", R"({
        "schema": 1,
        "model": {"family": "sho", "omega": [1.0]},
        "command": {"name": "trajectory", "initial": {"q": [1.0], "p": [0.0]},
                    "time": 6.283185307179586, "samples": 8},
        "output": {"format": "csv"}
    })");
    REQUIRE(r.exit_code == 0);
    std::istringstream lines(r.output);
    std::string header;
    std::getline(lines, header);
    CHECK(header == "t,q1,p1,H");
    int rows = 0;
    for (std::string line; std::getline(lines, line);) {
        ++rows;
        const auto last_comma = line.rfind(',');
        const double h = std::stod(line.substr(last_comma + 1));
        CHECK(h == Catch::Approx(0.5).margin(1e-9));
    }
    CHECK(rows == 9);
}

TEST_CASE("trajectory JSON carries labeled columns") {
    RunResult r = run_config("cli_traj_json", R"({
        "schema": 1,
        "model": {"family": "constant_b", "B": 1.5},
        "command": {"name": "trajectory", "initial": {"q": [1.0, 0.0], "p": [0.0, 0.5]},
                    "time": 2.0, "samples": 5}
    })");
    REQUIRE(r.exit_code == 0);
    json out = json::parse(r.output);
    CHECK(out["columns"] == json::array({"t", "q1", "q2", "p1", "p2", "H"}));
    CHECK(out["rows"].size() == 6);
    CHECK(out["max_energy_drift"].get<double>() < 1e-9);
}

TEST_CASE("CSV format is rejected for scalar-result commands") {
    RunResult r = run_config("cli_csv_reject", R"({
        "schema": 1,
        "model": {"family": "sho", "omega": [1.0]},
        "command": {"name": "curvature", "q": [0.0], "p": [0.0]},
        "output": {"format": "csv"}
    })");
    CHECK(r.exit_code == 2);
    CHECK(json::parse(r.output)["location"] == "$.output.format");
}

TEST_CASE("stability closed-form report matches the library verdict") {
    RunResult r = run_config("cli_stab", R"({
        "schema": 1,
        "command": {"name": "stability", "k": [-3.0, -0.5, 3.5], "B": 2.8284271247461903}
    })");
    REQUIRE(r.exit_code == 0);
    json out = json::parse(r.output);
    CHECK(out["spectrally_stable"].get<bool>());
    CHECK(out["gyroscopic_criterion_met"].get<bool>());
    CHECK_FALSE(out["curvature_positive"].get<bool>());
    CHECK(out["eigenvalues"].size() == 6);
}

TEST_CASE("stability grid sweep emits one CSV row per lattice point") {
    RunResult r = run_config("cli_stab_grid", R"({
        "schema": 1,
        "command": {"name": "stability",
                    "grid": {"k1": [-2.0, -0.5, 3], "k2": [-2.0, -0.5, 3],
                             "k3": [0.5, 1.5, 2], "B": [0.0, 3.0, 4]}},
        "output": {"format": "csv"}
    })");
    REQUIRE(r.exit_code == 0);
    std::istringstream lines(r.output);
    std::string header;
    std::getline(lines, header);
    CHECK(header.rfind("k1,k2,k3,B,", 0) == 0);
    int rows = 0;
    for (std::string line; std::getline(lines, line);) ++rows;
    CHECK(rows == 3 * 3 * 2 * 4);
}

TEST_CASE("output path writes the result to a file") {
    const std::string out_path = temp_path("cli_redirect_out.json");
    std::remove(out_path.c_str());
    RunResult r = run_config("cli_redirect", R"({
        "schema": 1,
        "model": {"family": "sho", "omega": [2.0]},
        "command": {"name": "curvature", "q": [0.0], "p": [0.0]},
        "output": {"path": ")" + out_path + R"("}
    })");
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.empty());
    std::ifstream f(out_path);
    REQUIRE(f.good());
    json out = json::parse(f);
    CHECK(out["ricci"].get<double>() == 4.0);
}

TEST_CASE("second-variation command reports raw and covariant forms") {
    RunResult r = run_config("cli_secvar", R"json({
        "schema": 1,
        "model": {"family": "sho", "omega": [1.5]},
        "command": {"name": "second-variation",
                    "initial": {"q": [0.5], "p": [0.0]}, "time": 2.0,
                    "variation": ["sin(pi*q1/2)"]}
    })json");
    REQUIRE(r.exit_code == 0);
    json out = json::parse(r.output);
    CHECK(out["difference"].get<double>() < 1e-7);
    CHECK(out["endpoint_norms"][0].get<double>() < 1e-12);
    CHECK(out["endpoint_norms"][1].get<double>() < 1e-12);
}
