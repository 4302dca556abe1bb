// test_cli.cpp — End-to-end checks of the experiment runner binary: exit
// codes, machine-readable outputs, cache behavior, reproducible reruns, and
// scan/audit file outputs. The binary path arrives in the QDB_CLI environment
// variable; every invocation runs against a fresh temporary cache directory.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qdb/optimize.hpp"
#include "qdb/reference.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

namespace {

using nlohmann::json;

struct CliResult {
    int exit_code = -1;
    std::string out;
};

const std::string& work_dir() {
    static const std::string dir = [] {
        char tmpl[] = "/tmp/qdblab-cli-XXXXXX";
        if (!mkdtemp(tmpl)) throw std::runtime_error("mkdtemp failed");
        setenv("QDBLAB_CACHE_DIR", (std::string(tmpl) + "/cache").c_str(), 1);
        return std::string(tmpl);
    }();
    return dir;
}

CliResult run_cli(const std::string& args) {
    work_dir(); // ensure the cache override is exported before the first child
    const char* bin = std::getenv("QDB_CLI");
    REQUIRE_MESSAGE(bin != nullptr, "QDB_CLI must point at the runner binary");
    const std::string cmd = std::string(bin) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult result;
    char buffer[4096];
    std::size_t got = 0;
    while ((got = fread(buffer, 1, sizeof buffer, pipe)) > 0) result.out.append(buffer, got);
    const int status = pclose(pipe);
    REQUIRE(WIFEXITED(status));
    result.exit_code = WEXITSTATUS(status);
    return result;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> cells;
    std::istringstream is(line);
    std::string cell;
    while (std::getline(is, cell, sep)) cells.push_back(cell);
    return cells;
}

} // namespace

// Declared first so the distinct-key cache starts cold for this case.
TEST_CASE("oracle computes, caches, and reports the exact spectrum") {
    const auto first = run_cli("oracle --N 4 --t 0.7 --B-tilde 0.2");
    REQUIRE(first.exit_code == 0);
    const json j = json::parse(first.out);
    CHECK(j["N"] == 4);
    CHECK(j["t"] == 0.7);
    CHECK(j["B_tilde"] == 0.2);
    CHECK(j["cached"] == false);
    CHECK(j["degenerate"] == false);
    CHECK(j["gap"].get<double>() > 0.0);
    CHECK(j["E0"].get<double>() < j["E1"].get<double>());
    const std::string path = j["path"].get<std::string>();
    CHECK(path.rfind(work_dir() + "/cache", 0) == 0);

    const auto gt = qdb::ground_truth(4, 0.7, 0.2);
    CHECK(std::abs(j["E0"].get<double>() - gt.E0) < 1e-12);
    CHECK(std::abs(j["E1"].get<double>() - gt.E1) < 1e-12);

    const auto second = run_cli("oracle --N 4 --t 0.7 --B-tilde 0.2");
    REQUIRE(second.exit_code == 0);
    const json j2 = json::parse(second.out);
    CHECK(j2["cached"] == true);
    CHECK(j2["E0"] == j["E0"]);
    CHECK(j2["path"] == j["path"]);
}

TEST_CASE("oracle refuses register sizes past the diagonalization cap") {
    const auto r = run_cli("oracle --N 15");
    CHECK(r.exit_code == 4);
    const json j = json::parse(r.out);
    CHECK(j["error"]["type"] == "size-cap");

    const auto grid = run_cli("oracle --N 4 6");
    CHECK(grid.exit_code == 2);
    CHECK(json::parse(grid.out)["error"]["type"] == "config");
}

TEST_CASE("dry run reports the unoptimized alternating-state energy") {
    const std::string out_path = work_dir() + "/dry.jsonl";
    const std::string args = "run --dry-run --N 4 --Np 9 --output " + out_path;
    const auto r = run_cli(args);
    REQUIRE(r.exit_code == 0);
    const json rec = json::parse(r.out);
    CHECK(rec["config_id"] == "qdb-mps-N4-Np9-n00.0");
    CHECK(rec["ansatz"] == "qdb-mps");
    CHECK(rec["n_qubits"] == 4);
    CHECK(rec["n_params"] == 9);
    REQUIRE(rec["theta_opt"].size() == 9);
    for (const auto& v : rec["theta_opt"]) CHECK(v.get<double>() == 0.0);

    // The identity circuit leaves the alternating input, whose energy is the
    // pure boundary-field term −2·B_tilde.
    CHECK(std::abs(rec["cost"].get<double>() - (-0.2)) < 1e-9);
    REQUIRE(rec["cost_trajectory"].size() == 1);
    CHECK(rec["cost_trajectory"][0][0] == 1);
    CHECK(!rec.contains("wall_seconds"));

    const auto gt = qdb::ground_truth(4, 0.5, 0.1);
    const double eps = (rec["cost"].get<double>() - gt.E0) / gt.gap;
    CHECK(std::abs(rec["metrics"]["epsilon"].get<double>() - eps) < 1e-9);
    CHECK(rec["metrics"].contains("fidelity"));
    CHECK(rec["metrics"].contains("epsilon_0")); // bus family: Fock-level split
    CHECK(rec["metrics"].contains("thermal_residual"));

    // Reruns are byte-identical on stdout and on disk: no wall times leak in.
    const std::string file_bytes = read_file(out_path);
    const auto again = run_cli(args);
    REQUIRE(again.exit_code == 0);
    CHECK(again.out == r.out);
    CHECK(read_file(out_path) == file_bytes);

    // The JSONL file holds exactly the printed record.
    const auto loaded = qdb::load_records(out_path);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].cost == rec["cost"].get<double>());
}

TEST_CASE("optimization improves on the dry baseline") {
    const std::string out_path = work_dir() + "/opt.jsonl";
    const auto r = run_cli("run --ansatz csa --N 4 --Np 6 --restarts 1 --hops 3 --seed 1 "
                           "--output " + out_path);
    REQUIRE(r.exit_code == 0);
    const json rec = json::parse(r.out);
    CHECK(rec["cost"].get<double>() < -0.5); // well below the −0.2 input energy
    CHECK(std::abs(rec["metrics"]["energy"].get<double>() - rec["cost"].get<double>()) < 1e-9);
    CHECK(rec["metrics"]["fidelity"].get<double>() > 0.0);
    CHECK(!rec["metrics"].contains("epsilon_0")); // no bus in this family
    // Trajectory is non-increasing.
    const auto& traj = rec["cost_trajectory"];
    REQUIRE(traj.size() >= 1);
    for (std::size_t i = 1; i < traj.size(); ++i)
        CHECK(traj[i][1].get<double>() <= traj[i - 1][1].get<double>());
}

TEST_CASE("configuration errors exit with code 2 and a reason") {
    for (const std::string args : {
             std::string("run --ansatz nonsense --N 4"),
             std::string("run --N 5"),                       // odd register
             std::string("run --N 4 6"),                     // grid passed to run
             std::string("run --N 4 --l 1"),                 // box too narrow
             std::string("run --ansatz csa --N 4 --Np 3 --n0 0.1"), // n0 without a bus
             std::string("scan --ansatz csa --N 2 4 --Np 3 6 --restarts 1 --hops 1"),
             std::string("scan --ansatz csa --N 4 --Np 3 --restarts 1 --hops 1"), // no axis
             std::string("run --N 4 --Np 11 --Np 9"),        // non-ascending grid
         }) {
        CAPTURE(args);
        const auto r = run_cli(args);
        CHECK(r.exit_code == 2);
        const json j = json::parse(r.out);
        CHECK(j["error"]["type"] == "config");
        CHECK(!j["error"]["what"].get<std::string>().empty());
    }
    // Missing subcommand is a usage error (no JSON guaranteed).
    CHECK(run_cli("--N 4").exit_code == 2);
}

TEST_CASE("config files merge with flag overrides") {
    const std::string cfg_path = work_dir() + "/config.json";
    {
        std::ofstream cfg(cfg_path);
        cfg << json{{"ansatz", "csa"},
                    {"N", 4},
                    {"Np", 3},
                    {"restarts", 1},
                    {"hops", 1},
                    {"output", work_dir() + "/from-config.jsonl"}}
                   .dump();
    }
    const auto r = run_cli("run --dry-run --config " + cfg_path);
    REQUIRE(r.exit_code == 0);
    const json rec = json::parse(r.out);
    CHECK(rec["ansatz"] == "csa");
    CHECK(rec["n_params"] == 3);
    CHECK(read_file(work_dir() + "/from-config.jsonl").find("csa-N4-Np3") != std::string::npos);

    const std::string bad_path = work_dir() + "/bad-config.json";
    {
        std::ofstream cfg(bad_path);
        cfg << json{{"no_such_knob", 1}}.dump();
    }
    const auto bad = run_cli("run --config " + bad_path);
    CHECK(bad.exit_code == 2);
    CHECK(json::parse(bad.out)["error"]["type"] == "config");
    CHECK(run_cli("run --config " + work_dir() + "/absent.json").exit_code == 2);
}

TEST_CASE("scan sweeps one axis and aligns jsonl, csv, and summary") {
    const std::string out_path = work_dir() + "/scan.jsonl";
    const auto r = run_cli("scan --ansatz csa --N 4 --Np 3 6 --restarts 1 --hops 2 "
                           "--sweep-rounds 1 --seed 3 --output " + out_path);
    REQUIRE(r.exit_code == 0);
    const json summary = json::parse(r.out);
    CHECK(summary["axis"] == "Np");
    CHECK(summary["values"] == json::array({3, 6}));
    CHECK(summary["records"] == 2);
    REQUIRE(summary["costs"].size() == 2);
    // The wider circuit nests the narrower one (appended layers at zero angle
    // act as the identity), so ferried solutions can only improve.
    CHECK(summary["costs"][1].get<double>() <= summary["costs"][0].get<double>() + 1e-6);

    const auto records = qdb::load_records(out_path);
    REQUIRE(records.size() == 2);
    CHECK(records[0].n_params == 3);
    CHECK(records[1].n_params == 6);
    CHECK(records[0].cost == summary["costs"][0].get<double>());
    CHECK(records[1].cost == summary["costs"][1].get<double>());

    const std::string csv_path = summary["csv"].get<std::string>();
    CHECK(csv_path == work_dir() + "/scan.csv");
    std::istringstream csv(read_file(csv_path));
    std::string line;
    REQUIRE(std::getline(csv, line));
    CHECK(split(line, ',')[0] == "axis");
    for (int i = 0; i < 2; ++i) {
        REQUIRE(std::getline(csv, line));
        const auto cells = split(line, ',');
        REQUIRE(cells.size() >= 8);
        CHECK(cells[0] == "Np");
        CHECK(cells[1] == records[static_cast<std::size_t>(i)].config_id);
        CHECK(std::stod(cells[7]) == records[static_cast<std::size_t>(i)].cost);
    }
    CHECK(!std::getline(csv, line)); // exactly header + one row per record
}

TEST_CASE("audit passes and mirrors its report file") {
    const std::string report = work_dir() + "/audit-report.json";
    const auto r = run_cli("audit --seed 2 --report " + report);
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.out);
    CHECK(j["pass"] == true);
    REQUIRE(j["checks"].is_array());
    CHECK(j["checks"].size() >= 6);
    for (const auto& check : j["checks"]) {
        CAPTURE(check["name"].get<std::string>());
        CHECK(check["pass"] == true);
    }
    CHECK(read_file(report) == r.out);
}
