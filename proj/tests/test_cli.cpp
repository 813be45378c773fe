#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string stderr_text;
};

// Runs the CLI with stderr captured to a file; stdout is discarded.
RunResult run_cli(const std::string& args, const std::string& work_dir,
                  const std::string& env = {}) {
    const std::string err_file = work_dir + "/stderr.txt";
    std::ostringstream cmd;
    cmd << env << (env.empty() ? "" : " ") << MFLQ_CLI_PATH << " " << args << " >/dev/null 2>"
        << err_file;
    const int raw = std::system(cmd.str().c_str());
    RunResult result;
    result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    std::ifstream in(err_file);
    std::ostringstream buf;
    buf << in.rdbuf();
    result.stderr_text = buf.str();
    return result;
}

std::string fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "mflq_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

// value of the named column in the k-th data row
double csv_value(const std::string& path, size_t row, const std::string& column) {
    const std::vector<std::string> lines = lines_of(slurp(path));
    REQUIRE(lines.size() > row + 1);
    const auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::istringstream in(s);
        std::string cell;
        while (std::getline(in, cell, ',')) cells.push_back(cell);
        return cells;
    };
    const std::vector<std::string> header = split(lines[0]);
    const std::vector<std::string> data = split(lines[row + 1]);
    for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == column) {
            REQUIRE(i < data.size());
            return std::stod(data[i]);
        }
    }
    FAIL("column not found: " << column);
    return 0.0;
}

} // namespace

TEST_CASE("riccati command writes the backward sequences") {
    const std::string dir = fresh_dir("riccati");
    const RunResult r = run_cli("riccati --problem example --N 1024 --out " + dir, dir);
    CHECK(r.exit_code == 0);
    const std::vector<std::string> lines = lines_of(slurp(dir + "/P.csv"));
    CHECK(lines.size() == 1026); // header + 1025 grid rows
    CHECK(std::abs(csv_value(dir + "/P.csv", 0, "P00") - 3.194528) < 0.02);
    CHECK(std::abs(csv_value(dir + "/Pi.csv", 0, "Pi00") - 2.463019) < 0.01);
    CHECK(fs::exists(dir + "/gains.csv"));
}

TEST_CASE("riccati command with a reference grid writes trajectories and errors") {
    const std::string dir = fresh_dir("riccati_ref");
    const RunResult r =
        run_cli("riccati --problem example --N 16 --Nref 4096 --out " + dir, dir);
    CHECK(r.exit_code == 0);
    CHECK(lines_of(slurp(dir + "/Pref.csv")).size() == 4098); // header + 4097 grid rows
    const nlohmann::json err = nlohmann::json::parse(slurp(dir + "/riccati_errors.json"));
    CHECK(err.at("p_error").get<double>() > 0.0);
    CHECK(err.at("p_error").get<double>() < 1.0);
    CHECK(err.at("psd_flagged").get<bool>() == false);
    // a reference grid that the mesh does not divide is a config error
    const RunResult bad =
        run_cli("riccati --problem example --N 24 --Nref 4096 --out " + dir, dir);
    CHECK(bad.exit_code == 2);
}

TEST_CASE("riccati command on a zero problem writes zero files") {
    const std::string dir = fresh_dir("riccati_zero");
    {
        std::ofstream out(dir + "/zero.json");
        out << R"({"n": 1, "m": 1, "T": 1.0, "x0": [0.0], "R": [1.0]})";
    }
    const RunResult r = run_cli("riccati --problem " + dir + "/zero.json --N 4 --out " + dir, dir);
    CHECK(r.exit_code == 0);
    for (size_t k = 0; k < 5; ++k) {
        CHECK(csv_value(dir + "/P.csv", k, "P00") == 0.0);
        CHECK(csv_value(dir + "/Pi.csv", k, "Pi00") == 0.0);
    }
}

TEST_CASE("malformed problem JSON exits 2 and names the key") {
    const std::string dir = fresh_dir("badjson");
    {
        std::ofstream out(dir + "/bad.json");
        out << R"({"n": 2, "m": 1, "T": 1.0, "x0": [1, 0], "Q": [1, 2, 3]})";
    }
    const RunResult r = run_cli("riccati --problem " + dir + "/bad.json --N 4 --out " + dir, dir);
    CHECK(r.exit_code == 2);
    const nlohmann::json err = nlohmann::json::parse(r.stderr_text);
    CHECK(err.at("kind") == "parse");
    CHECK(err.at("key") == "Q");
}

TEST_CASE("assumption violation exits 2 with the condition name") {
    const std::string dir = fresh_dir("assumption");
    {
        std::ofstream out(dir + "/bad.json");
        // R is not positive definite
        out << R"({"n": 1, "m": 1, "T": 1.0, "x0": [1.0], "R": [0.0]})";
    }
    const RunResult r = run_cli("riccati --problem " + dir + "/bad.json --N 4 --out " + dir, dir);
    CHECK(r.exit_code == 2);
    const nlohmann::json err = nlohmann::json::parse(r.stderr_text);
    CHECK(err.at("kind") == "assumption");
    CHECK(err.at("key") == "R > 0");
}

TEST_CASE("numerical blowup exits 3") {
    const std::string dir = fresh_dir("blowup");
    {
        std::ofstream out(dir + "/stiff.json");
        out << R"({"n": 1, "m": 1, "T": 1.0, "x0": [1.0], "A": [30.0], "Q": [1.0], "R": [1.0]})";
    }
    const RunResult r = run_cli("riccati --problem " + dir + "/stiff.json --N 32 --out " + dir, dir);
    CHECK(r.exit_code == 3);
    const nlohmann::json err = nlohmann::json::parse(r.stderr_text);
    CHECK(err.at("kind") == "unstable");
}

TEST_CASE("invalid configuration exits 2") {
    const std::string dir = fresh_dir("badconfig");
    CHECK(run_cli("simulate --problem example --N 0 --out " + dir, dir).exit_code == 2);
    CHECK(run_cli("converge --problem example --levels 1:30 --out " + dir, dir).exit_code == 2);
    CHECK(run_cli("converge --problem example --levels nonsense --out " + dir, dir).exit_code == 2);
    CHECK(run_cli("frobnicate", dir).exit_code == 2);
}

TEST_CASE("simulate is byte-stable for a fixed flag set") {
    const std::string dir_a = fresh_dir("sim_a");
    const std::string dir_b = fresh_dir("sim_b");
    const std::string flags = "simulate --problem example --N 16 --M 1 --seed 7 --out ";
    CHECK(run_cli(flags + dir_a, dir_a).exit_code == 0);
    CHECK(run_cli(flags + dir_b, dir_b).exit_code == 0);
    for (const char* name : {"/means.csv", "/moments.csv", "/cost.json"}) {
        CHECK(slurp(dir_a + name) == slurp(dir_b + name));
    }
}

TEST_CASE("simulate lands near the optimal value at the documented resolution") {
    const std::string dir = fresh_dir("sim_cost");
    const RunResult r = run_cli(
        "simulate --problem example --N 32 --M 10000 --seed 42 --out " + dir, dir);
    CHECK(r.exit_code == 0);
    const nlohmann::json cost = nlohmann::json::parse(slurp(dir + "/cost.json"));
    CHECK(std::abs(cost.at("J_tau").get<double>() - 2.463019) <= 0.1);
}

TEST_CASE("bsde on a zero problem writes zero adjoints") {
    const std::string dir = fresh_dir("bsde_zero");
    {
        std::ofstream out(dir + "/zero.json");
        out << R"({"n": 1, "m": 1, "T": 1.0, "x0": [0.0], "R": [1.0]})";
    }
    const RunResult r =
        run_cli("bsde --problem " + dir + "/zero.json --N 8 --out " + dir, dir);
    CHECK(r.exit_code == 0);
    for (size_t k = 0; k < 8; ++k) {
        CHECK(csv_value(dir + "/bsde_means.csv", k, "mean_y0") == 0.0);
        CHECK(csv_value(dir + "/bsde_means.csv", k, "mean_z0") == 0.0);
    }
}

TEST_CASE("MFLQ_SEED overrides the seed flag") {
    const std::string dir_env = fresh_dir("seed_env");
    const std::string dir_flag = fresh_dir("seed_flag");
    CHECK(run_cli("simulate --problem example --N 16 --M 4 --seed 7 --out " + dir_env, dir_env,
                  "MFLQ_SEED=42")
              .exit_code == 0);
    CHECK(run_cli("simulate --problem example --N 16 --M 4 --seed 42 --out " + dir_flag, dir_flag)
              .exit_code == 0);
    CHECK(slurp(dir_env + "/moments.csv") == slurp(dir_flag + "/moments.csv"));
}

TEST_CASE("zero-noise debug run reproduces the hand value") {
    const std::string dir = fresh_dir("zeronoise");
    const RunResult r = run_cli(
        "simulate --problem example --N 2 --M 1 --seed 1 --zero-noise --dump-paths --out " + dir,
        dir);
    CHECK(r.exit_code == 0);
    CHECK(csv_value(dir + "/means.csv", 1, "mean_x0") == doctest::Approx(6.0 / 7.0).epsilon(1e-9));
    CHECK(csv_value(dir + "/paths.csv", 1, "x0") == doctest::Approx(6.0 / 7.0).epsilon(1e-9));
}

TEST_CASE("converge writes rate reports") {
    const std::string dir = fresh_dir("converge");
    const RunResult r = run_cli(
        "converge --problem example --levels 4:7 --metric mean --out " + dir, dir);
    CHECK(r.exit_code == 0);
    const nlohmann::json rates = nlohmann::json::parse(slurp(dir + "/rates.json"));
    const double slope = rates.at("mean_x").at("slope").get<double>();
    CHECK(slope > 0.85);
    CHECK(slope < 1.15);
    CHECK(slurp(dir + "/rates.csv").rfind("metric,N,tau,error,stderr,flag", 0) == 0);
}

TEST_CASE("converge with a single level reports insufficient levels") {
    const std::string dir = fresh_dir("converge_single");
    const RunResult r = run_cli(
        "converge --problem example --levels 4:4 --metric riccati --out " + dir, dir);
    CHECK(r.exit_code == 0);
    const nlohmann::json rates = nlohmann::json::parse(slurp(dir + "/rates.json"));
    CHECK(rates.at("riccati_pi").at("slope") == "insufficient-levels");
}

TEST_CASE("converge riccati metric works for generic problems via the reference") {
    const std::string dir = fresh_dir("converge_generic");
    {
        std::ofstream out(dir + "/prob.json");
        out << R"({"n": 1, "m": 1, "T": 1.0, "x0": [1.0],
                   "A": [0.5], "B": [1.0], "Q": [1.0], "R": [1.0], "G": [1.0]})";
    }
    const RunResult r = run_cli("converge --problem " + dir + "/prob.json --levels 4:6 " +
                                    "--metric riccati --Nref 4096 --out " + dir,
                                dir);
    CHECK(r.exit_code == 0);
    const RunResult bad = run_cli("converge --problem " + dir + "/prob.json --levels 4:6 " +
                                      "--metric mean --out " + dir,
                                  dir);
    CHECK(bad.exit_code == 2); // closed-form trajectories exist only for the builtin example
}

TEST_CASE("bsde command reconstructs the adjoint means") {
    const std::string dir = fresh_dir("bsde");
    const RunResult r = run_cli("bsde --problem example --N 1024 --out " + dir, dir);
    CHECK(r.exit_code == 0);
    CHECK(std::abs(csv_value(dir + "/bsde_means.csv", 0, "mean_y0") - 2.463019) < 0.02);
    CHECK(fs::exists(dir + "/bsde_paths.csv"));
}

TEST_CASE("the y-weight switch changes only the y fluctuation columns") {
    const std::string dir_p = fresh_dir("bsde_p");
    const std::string dir_pi = fresh_dir("bsde_pi");
    const std::string flags = "bsde --problem example --N 8 --M 2 --seed 5 ";
    CHECK(run_cli(flags + "--y-weight p --out " + dir_p, dir_p).exit_code == 0);
    CHECK(run_cli(flags + "--y-weight pi --out " + dir_pi, dir_pi).exit_code == 0);
    CHECK(slurp(dir_p + "/bsde_means.csv") == slurp(dir_pi + "/bsde_means.csv"));
    CHECK(slurp(dir_p + "/bsde_paths.csv") != slurp(dir_pi + "/bsde_paths.csv"));
    for (size_t row = 0; row < 16; ++row) {
        CHECK(csv_value(dir_p + "/bsde_paths.csv", row, "z0") ==
              csv_value(dir_pi + "/bsde_paths.csv", row, "z0"));
        CHECK(csv_value(dir_p + "/bsde_paths.csv", row, "mean_y0") ==
              csv_value(dir_pi + "/bsde_paths.csv", row, "mean_y0"));
    }
}
