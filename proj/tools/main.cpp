#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mflq/analytic.hpp"
#include "mflq/bsde.hpp"
#include "mflq/csv.hpp"
#include "mflq/harness.hpp"
#include "mflq/policy.hpp"
#include "mflq/riccati.hpp"
#include "mflq/rng.hpp"
#include "mflq/simulate.hpp"

namespace {

using namespace mflq;
namespace fs = std::filesystem;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Config {
    std::string problem = "example";
    std::string out = ".";
    int steps = 32;        // N
    int n_ref = 0;         // 0: no reference run
    int num_paths = 10000; // M
    std::uint64_t seed = 1;
    int level_lo = 4; // exponents: levels are 2^lo .. 2^hi
    int level_hi = 10;
    int workers = 0;
    bool zero_noise = false;
    bool dump_paths = false;
    std::string y_weight = "p";
    std::string metric = "all";
};

class ConfigError : public Error {
public:
    using Error::Error;
};

void emit_error_json(const std::string& kind, const std::string& message,
                     const std::string& key = {}) {
    nlohmann::json doc = {{"kind", kind}, {"message", message}};
    if (!key.empty()) doc["key"] = key;
    std::cerr << doc.dump() << "\n";
}

ProblemData load_problem(const Config& cfg) {
    ProblemData p =
        cfg.problem == "example" ? example_problem() : load_problem_file(cfg.problem);
    require_valid(p);
    return p;
}

std::string out_path(const Config& cfg, const std::string& name) {
    return (fs::path(cfg.out) / name).string();
}

void prepare_out_dir(const Config& cfg) {
    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    if (ec) throw ConfigError("cannot create output directory " + cfg.out + ": " + ec.message());
}

void apply_seed_env(Config& cfg) {
    if (const char* env = std::getenv("MFLQ_SEED")) {
        try {
            cfg.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("MFLQ_SEED must be a non-negative integer");
        }
    }
}

void check_common(const Config& cfg) {
    if (cfg.steps < 1) throw ConfigError("N must be positive");
    if (cfg.num_paths < 1) throw ConfigError("M must be positive");
    if (cfg.seed < 1) throw ConfigError("seed must be positive");
    if (cfg.level_lo < 2 || cfg.level_hi > 20 || cfg.level_lo > cfg.level_hi) {
        throw ConfigError("levels must satisfy 2 <= lo <= hi <= 20");
    }
}

std::vector<int> level_list(const Config& cfg) {
    std::vector<int> levels;
    for (int e = cfg.level_lo; e <= cfg.level_hi; ++e) levels.push_back(1 << e);
    return levels;
}

struct SolvedProblem {
    ProblemData p;
    HatCoefficients hat;
    TimeMesh mesh;
    RiccatiSequence P;
    RiccatiSequence Pi;
    FeedbackPolicy policy;
};

SolvedProblem solve_chain(const Config& cfg) {
    SolvedProblem s{load_problem(cfg), {}, {}, {}, {}, {}};
    s.hat = hat_transform(s.p);
    s.mesh = make_mesh(cfg.steps, s.p.T);
    s.P = solve_p_difference(s.p, s.mesh);
    s.Pi = solve_pi_difference(s.p, s.hat, s.mesh, s.P);
    s.policy = synthesize_gains(s.p, s.hat, s.P, s.Pi);
    return s;
}

int cmd_riccati(const Config& cfg) {
    prepare_out_dir(cfg);
    const SolvedProblem s = solve_chain(cfg);
    csv::write_riccati(out_path(cfg, "P.csv"), s.P, "P");
    csv::write_riccati(out_path(cfg, "Pi.csv"), s.Pi, "Pi");
    csv::write_gains(out_path(cfg, "gains.csv"), s.policy);

    if (cfg.n_ref > 0) {
        const ContinuousRiccatiReference ref = solve_continuous_reference(s.p, s.hat, cfg.n_ref);
        csv::write_riccati(out_path(cfg, "Pref.csv"), ref.p, "P");
        csv::write_riccati(out_path(cfg, "Piref.csv"), ref.pi, "Pi");
        const nlohmann::json doc = {{"p_error", riccati_error(s.P, ref.p)},
                                    {"pi_error", riccati_error(s.Pi, ref.pi)},
                                    {"N", cfg.steps},
                                    {"N_ref", cfg.n_ref},
                                    {"psd_flagged", ref.psd_flagged}};
        csv::write_text(out_path(cfg, "riccati_errors.json"), doc.dump(2) + "\n");
    }
    return 0;
}

int cmd_simulate(const Config& cfg) {
    prepare_out_dir(cfg);
    const SolvedProblem s = solve_chain(cfg);
    const MeanTrajectory means = mean_recursion(s.p, s.hat, s.policy);
    const MonteCarloResult mc = monte_carlo(s.p, s.policy, means, cfg.num_paths, cfg.seed,
                                            {cfg.workers, cfg.zero_noise});
    const CostReport cost = discrete_cost(s.p, mc.ensemble, means);

    csv::write_means(out_path(cfg, "means.csv"), means);
    csv::write_moments(out_path(cfg, "moments.csv"), mc.summary);
    csv::write_text(out_path(cfg, "cost.json"),
                    csv::cost_json(cost, cfg.steps, cfg.num_paths, cfg.seed));
    if (cfg.dump_paths) csv::write_paths(out_path(cfg, "paths.csv"), mc.ensemble);
    return 0;
}

int cmd_converge(const Config& cfg) {
    prepare_out_dir(cfg);
    const ProblemData p = load_problem(cfg);
    const std::vector<int> levels = level_list(cfg);
    const bool is_example = cfg.problem == "example";
    const HarnessOptions opts{cfg.workers};

    const bool want_all = cfg.metric == "all";
    std::vector<RateReport> reports;

    if (want_all || cfg.metric == "riccati") {
        if (is_example) {
            auto [rp, rpi] = riccati_convergence(p, levels, example_oracle());
            reports.push_back(std::move(rp));
            reports.push_back(std::move(rpi));
        } else {
            const int n_ref = cfg.n_ref > 0 ? cfg.n_ref : (1 << 14);
            auto [rp, rpi] = riccati_convergence(p, levels, n_ref);
            reports.push_back(std::move(rp));
            reports.push_back(std::move(rpi));
        }
    }
    if (want_all || cfg.metric == "mean" || cfg.metric == "strong" || cfg.metric == "bsde") {
        if (!is_example) {
            throw ConfigError("metric '" + cfg.metric +
                              "' needs closed-form trajectories; only --problem example has them");
        }
        const ExactOracle oracle = example_oracle();
        if (want_all || cfg.metric == "mean") {
            auto [mx, mu] = mean_convergence(p, oracle, levels);
            reports.push_back(std::move(mx));
            reports.push_back(std::move(mu));
        }
        if (want_all || cfg.metric == "strong") {
            auto [sx, su] = strong_convergence(p, oracle, levels, cfg.num_paths, cfg.seed, opts);
            reports.push_back(std::move(sx));
            reports.push_back(std::move(su));
        }
        if (want_all || cfg.metric == "bsde") {
            BsdeConvergence bc = bsde_convergence(p, oracle, levels, cfg.num_paths, cfg.seed, opts);
            reports.push_back(std::move(bc.mean_y));
            reports.push_back(std::move(bc.mean_z));
            reports.push_back(std::move(bc.second_y));
            reports.push_back(std::move(bc.second_y_pi));
            reports.push_back(std::move(bc.second_z));
        }
    }

    csv::write_rates(out_path(cfg, "rates.csv"), reports);
    csv::write_text(out_path(cfg, "rates.json"), csv::rates_json(reports));
    return 0; // slope assessment is the test suite's job, not the CLI's
}

int cmd_bsde(const Config& cfg) {
    prepare_out_dir(cfg);
    const SolvedProblem s = solve_chain(cfg);
    const MeanTrajectory means = mean_recursion(s.p, s.hat, s.policy);
    const AdjointMeans am = reconstruct_means(s.P, s.Pi, s.hat, means);
    csv::write_adjoint_means(out_path(cfg, "bsde_means.csv"), am);

    const YWeight weight = cfg.y_weight == "pi" ? YWeight::Pi : YWeight::P;
    const MonteCarloResult mc = monte_carlo(s.p, s.policy, means, cfg.num_paths, cfg.seed,
                                            {cfg.workers, cfg.zero_noise});
    std::vector<AdjointPath> adjoints;
    adjoints.reserve(mc.ensemble.paths.size());
    for (const PathResult& path : mc.ensemble.paths) {
        adjoints.push_back(reconstruct_path(s.P, s.Pi, s.hat, s.p, path, means, weight));
    }
    csv::write_adjoint_paths(out_path(cfg, "bsde_paths.csv"), adjoints);
    return 0;
}

int dispatch(const std::string& command, const Config& cfg) {
    if (command == "riccati") return cmd_riccati(cfg);
    if (command == "simulate") return cmd_simulate(cfg);
    if (command == "converge") return cmd_converge(cfg);
    return cmd_bsde(cfg);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mean-field LQ control: Riccati solvers, closed-loop simulation, "
                 "adjoint reconstruction and convergence studies"};
    app.require_subcommand(1);

    Config cfg;
    std::string levels_arg = "4:10";

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--problem", cfg.problem, "'example' or path to a problem JSON file");
        sub->add_option("--out", cfg.out, "output directory");
        sub->add_option("--seed", cfg.seed, "master seed (MFLQ_SEED overrides)");
        sub->add_option("--workers", cfg.workers, "worker cap; does not affect outputs");
        return sub;
    };

    CLI::App* riccati = add_common(app.add_subcommand("riccati", "solve the difference Riccati pair"));
    riccati->add_option("--N", cfg.steps, "number of time steps");
    riccati->add_option("--Nref", cfg.n_ref, "reference grid steps (enables the RK4 reference)");

    CLI::App* simulate = add_common(app.add_subcommand("simulate", "closed-loop two-pass simulation"));
    simulate->add_option("--N", cfg.steps, "number of time steps");
    simulate->add_option("--M", cfg.num_paths, "Monte Carlo path count");
    simulate->add_flag("--zero-noise", cfg.zero_noise, "force all Brownian increments to zero");
    simulate->add_flag("--dump-paths", cfg.dump_paths, "write per-path trajectories");

    CLI::App* converge = add_common(app.add_subcommand("converge", "convergence-rate studies"));
    converge->add_option("--levels", levels_arg, "exponent range lo:hi, levels are 2^lo..2^hi");
    converge->add_option("--M", cfg.num_paths, "Monte Carlo path count");
    converge->add_option("--Nref", cfg.n_ref, "reference grid steps for generic problems");
    converge->add_option("--metric", cfg.metric, "all, riccati, mean, strong or bsde")
        ->check(CLI::IsMember({"all", "riccati", "mean", "strong", "bsde"}));

    CLI::App* bsde = add_common(app.add_subcommand("bsde", "adjoint pair reconstruction"));
    bsde->add_option("--N", cfg.steps, "number of time steps");
    CLI::Option* bsde_paths = bsde->add_option("--M", cfg.num_paths, "paths to reconstruct");
    bsde->add_option("--y-weight", cfg.y_weight, "fluctuation weight in y: p or pi")
        ->check(CLI::IsMember({"p", "pi"}));
    bsde->add_flag("--zero-noise", cfg.zero_noise, "force all Brownian increments to zero");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        emit_error_json("config", e.what());
        return kExitConfig;
    }

    try {
        const std::string command = app.get_subcommands().front()->get_name();
        if (command == "bsde" && bsde_paths->count() == 0) cfg.num_paths = 1;
        if (command == "converge") {
            const size_t colon = levels_arg.find(':');
            if (colon == std::string::npos) throw ConfigError("--levels must look like lo:hi");
            try {
                cfg.level_lo = std::stoi(levels_arg.substr(0, colon));
                cfg.level_hi = std::stoi(levels_arg.substr(colon + 1));
            } catch (const std::exception&) {
                throw ConfigError("--levels must look like lo:hi with integer exponents");
            }
        }
        apply_seed_env(cfg);
        check_common(cfg);
        return dispatch(command, cfg);
    } catch (const ConfigError& e) {
        emit_error_json("config", e.what());
        return kExitConfig;
    } catch (const ParseError& e) {
        emit_error_json("parse", e.what(), e.key());
        return kExitConfig;
    } catch (const AssumptionViolated& e) {
        emit_error_json("assumption", e.what(), e.condition());
        return kExitConfig;
    } catch (const ShapeMismatch& e) {
        emit_error_json("shape", e.what());
        return kExitConfig;
    } catch (const NonFinite& e) {
        emit_error_json("nonfinite", e.what());
        return kExitConfig;
    } catch (const DomainError& e) {
        emit_error_json("domain", e.what());
        return kExitConfig;
    } catch (const MeshMismatch& e) {
        emit_error_json("mesh", e.what());
        return kExitConfig;
    } catch (const NotPositiveDefinite& e) {
        emit_error_json("not-positive-definite", e.what());
        return kExitNumerical;
    } catch (const StepUnstable& e) {
        emit_error_json("unstable", e.what());
        return kExitNumerical;
    } catch (const Error& e) {
        emit_error_json("numerical", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        emit_error_json("internal", e.what());
        return kExitNumerical;
    }
}
