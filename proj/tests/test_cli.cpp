// End-to-end checks of the command-line tool: exit codes, config-file
// precedence, unit sugar, determinism, thread-count independence.

#include <catch2/catch_amalgamated.hpp>

#include <nlohmann/json.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout only
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(ASYMFP_CLI_PATH) + " " + args + " 2>/dev/null";
    std::array<char, 4096> buffer{};
    RunResult result;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::size_t n = 0;
    while ((n = fread(buffer.data(), 1, buffer.size(), pipe)) > 0)
        result.output.append(buffer.data(), n);
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string temp_path(const std::string& name) {
    return std::string("/tmp/asymfp_cli_test_") + name;
}

}  // namespace

TEST_CASE("missing required inputs exit with code 2") {
    CHECK(run_cli("density --t 0.004").exit_code == 2);          // no sigma
    CHECK(run_cli("density --sigma 0.1").exit_code == 2);        // no horizon
    CHECK(run_cli("frobnicate --sigma 0.1").exit_code == 2);     // unknown subcommand
    CHECK(run_cli("density --sigma 0.1 --t 0.004 --t-days 1").exit_code == 2);
    CHECK(run_cli("density --sigma 0.1 --t 0.004 --grid-points 10").exit_code == 2);
}

TEST_CASE("coeffs writes a table document and eps = 0 collapses K") {
    const auto p1 = temp_path("k1.json");
    const auto p3 = temp_path("k3.json");
    REQUIRE(run_cli("coeffs --sigma 0.1 --epsilon 0 --N 12 --K 1 --out " + p1).exit_code == 0);
    REQUIRE(run_cli("coeffs --sigma 0.1 --epsilon 0 --N 12 --K 3 --out " + p3).exit_code == 0);
    const auto d1 = nlohmann::json::parse(slurp(p1));
    const auto d3 = nlohmann::json::parse(slurp(p3));
    CHECK(d1.at("entries") == d3.at("entries"));  // identical coefficients
    CHECK(d1.at("params").at("sigma") == 0.1);
    CHECK(d3.at("trunc").at("K") == 3);
}

TEST_CASE("config file values are overridden by flags") {
    const auto cfg_path = temp_path("config.json");
    {
        std::ofstream cfg(cfg_path);
        cfg << R"({"sigma": 0.2, "epsilon": 0.01, "N": 10, "K": 2})";
    }
    const auto out_a = temp_path("cfg_a.json");
    const auto out_b = temp_path("cfg_b.json");
    REQUIRE(run_cli("coeffs --config " + cfg_path + " --out " + out_a).exit_code == 0);
    REQUIRE(run_cli("coeffs --config " + cfg_path + " --sigma 0.1 --out " + out_b).exit_code == 0);
    CHECK(nlohmann::json::parse(slurp(out_a)).at("params").at("sigma") == 0.2);
    CHECK(nlohmann::json::parse(slurp(out_b)).at("params").at("sigma") == 0.1);

    // unknown config keys are rejected
    const auto bad_path = temp_path("bad.json");
    {
        std::ofstream cfg(bad_path);
        cfg << R"({"sigmaa": 0.2})";
    }
    CHECK(run_cli("coeffs --config " + bad_path).exit_code == 2);
}

TEST_CASE("horizon sugar: --t-days and --t-months") {
    const auto a = temp_path("days.csv");
    const auto b = temp_path("t.csv");
    const std::string base = "density --sigma 0.1 --epsilon 0.005 --N 20 --K 2 --grid-points 51 ";
    REQUIRE(run_cli(base + "--t-days 1 --out " + a).exit_code == 0);
    REQUIRE(run_cli(base + "--t 0.004 --out " + b).exit_code == 0);
    CHECK(slurp(a) == slurp(b));

    const auto c = temp_path("months.csv");
    const auto d = temp_path("t2.csv");
    REQUIRE(run_cli(base + "--t-months 1 --out " + c).exit_code == 0);
    REQUIRE(run_cli(base + "--t 0.08 --out " + d).exit_code == 0);
    CHECK(slurp(c) == slurp(d));
}

TEST_CASE("oracle regime precondition fails with exit 4 and names the bound") {
    const auto r = run_cli("oracle --sigma 0.1 --epsilon 0.005 --t 0.004");
    CHECK(r.exit_code == 4);
}

TEST_CASE("oracle runs in the valid regime") {
    const auto lattice_csv = temp_path("lattice.csv");
    const auto r = run_cli(
        "oracle --sigma 0.1 --epsilon 0.005 --t 0.08 --N 60 --K 3 --grid-points 801 "
        "--grid-sd 5 --bulk 2 --out " + lattice_csv);
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("symbol_taylor_residual=") != std::string::npos);
    CHECK(r.output.find("max_rel_error=") != std::string::npos);
    const auto csv = slurp(lattice_csv);
    CHECK(csv.rfind("j,x,mass\n", 0) == 0);
}

TEST_CASE("unwritable output path exits with code 3") {
    CHECK(run_cli("coeffs --sigma 0.1 --N 8 --K 2 --out /nonexistent-dir/x.json").exit_code == 3);
}

TEST_CASE("cutoff prints the ratio estimate and safe order") {
    const auto r = run_cli("cutoff --sigma 0.1 --epsilon 0.005 --K 4 --tol 0.05 --t 0.08");
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("min_t=8.0") != std::string::npos);  // 0.08 in scientific form 8.0e-02
    CHECK(r.output.find("K_safe=4") != std::string::npos);
}

TEST_CASE("repeated runs and different thread counts are byte-identical") {
    const auto a = temp_path("det_a.csv");
    const auto b = temp_path("det_b.csv");
    const auto c = temp_path("det_c.csv");
    const std::string base =
        "density --sigma 0.1 --epsilon 0.005 --N 30 --K 3 --t 0.08 --grid-points 101 ";
    REQUIRE(run_cli(base + "--threads 1 --out " + a).exit_code == 0);
    REQUIRE(run_cli(base + "--threads 1 --out " + b).exit_code == 0);
    REQUIRE(run_cli(base + "--threads 4 --out " + c).exit_code == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(a) == slurp(c));
}

TEST_CASE("scan-n reports the stabilization index") {
    const auto r = run_cli(
        "scan-n --sigma 0.1 --epsilon 0.005 --K 2 --t 0.004 --n-min 10 --n-max 80 "
        "--n-step 10 --x-sd 4 --out " + temp_path("scan_n.csv"));
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("stabilized_at=") != std::string::npos);
    const auto csv = slurp(temp_path("scan_n.csv"));
    CHECK(csv.rfind("N,value,rel_change\n", 0) == 0);
}

TEST_CASE("scan-k emits one sup-difference per truncation order") {
    const auto out = temp_path("scan_k.csv");
    const auto r = run_cli(
        "scan-k --sigma 0.1 --epsilon 0.005 --N 40 --t 0.08 --k-max 4 --out " + out);
    REQUIRE(r.exit_code == 0);
    const auto csv = slurp(out);
    CHECK(csv.rfind("K,d_sup\n", 0) == 0);
    std::size_t lines = 0;
    for (char ch : csv)
        if (ch == '\n') ++lines;
    CHECK(lines == 4);  // header + K = 1..3
}

TEST_CASE("table3 emits rounded rows plus reference columns") {
    const auto out = temp_path("table3.csv");
    const auto r = run_cli("table3 --sigma 0.1 --epsilon 0.002 --out " + out);
    REQUIRE(r.exit_code == 0);
    const auto csv = slurp(out);
    CHECK(csv.find("4,0.002,0.0006,-0.0494,0.0128") != std::string::npos);
    const auto summary = nlohmann::json::parse(r.output);
    CHECK(summary.at("table") == "table3");
}
