#include "mflq/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "mflq/rng.hpp"

namespace mflq {

MeanTrajectory mean_recursion(const ProblemData& p, [[maybe_unused]] const HatCoefficients& hat,
                              const FeedbackPolicy& policy) {
    const TimeMesh& mesh = policy.mesh;
    const double tau = mesh.tau();

    MeanTrajectory traj;
    traj.mesh = mesh;
    traj.mean_x.resize(static_cast<size_t>(mesh.steps) + 1);
    traj.mean_u.resize(static_cast<size_t>(mesh.steps));
    traj.mean_x[0] = p.x0;

    // Term-for-term the same arithmetic as simulate_path with x = mean and
    // zero increments, so a noiseless path collapses onto the means exactly.
    for (int k = 0; k < mesh.steps; ++k) {
        const size_t i = static_cast<size_t>(k);
        const VectorXd& mx = traj.mean_x[i];
        const VectorXd mu = control_discrete(policy, k, mx, mx); // = -K2_k mx
        traj.mean_u[i] = mu;
        traj.mean_x[i + 1] = mx + tau * (p.A * mx + p.Abar * mx + p.B * mu + p.Bbar * mu);
    }
    return traj;
}

PathResult simulate_path(const ProblemData& p, const FeedbackPolicy& policy,
                         const MeanTrajectory& means, std::span<const double> increments) {
    const TimeMesh& mesh = policy.mesh;
    if (!(means.mesh == mesh)) throw MeshMismatch("means must live on the policy mesh");
    if (increments.size() != static_cast<size_t>(mesh.steps)) {
        throw MeshMismatch("increment count must equal the number of steps");
    }
    const double tau = mesh.tau();

    PathResult path;
    path.x.resize(static_cast<size_t>(mesh.steps) + 1);
    path.u.resize(static_cast<size_t>(mesh.steps));
    path.x[0] = p.x0;

    for (int k = 0; k < mesh.steps; ++k) {
        const size_t i = static_cast<size_t>(k);
        const VectorXd& x = path.x[i];
        const VectorXd& mx = means.mean_x[i];
        const VectorXd& mu = means.mean_u[i];
        const VectorXd u = control_discrete(policy, k, x, mx);
        path.u[i] = u;

        const VectorXd drift = p.A * x + p.Abar * mx + p.B * u + p.Bbar * mu;
        const VectorXd diffusion = p.C * x + p.Cbar * mx + p.D * u + p.Dbar * mu;
        path.x[i + 1] = x + tau * drift + diffusion * increments[i];
    }
    return path;
}

namespace {

MomentSummary summarize(const PathEnsemble& ensemble, int n, int m) {
    const TimeMesh& mesh = ensemble.mesh;
    const int M = static_cast<int>(ensemble.paths.size());
    const size_t np = static_cast<size_t>(mesh.steps) + 1;

    MomentSummary s;
    s.mesh = mesh;
    s.mean_x.assign(np, VectorXd::Zero(n));
    s.second_x.assign(np, 0.0);
    s.se_mean_x.assign(np, VectorXd::Zero(n));
    s.se_second_x.assign(np, 0.0);
    s.mean_u.assign(np - 1, VectorXd::Zero(m));
    s.second_u.assign(np - 1, 0.0);
    s.se_mean_u.assign(np - 1, VectorXd::Zero(m));
    s.se_second_u.assign(np - 1, 0.0);

    std::vector<VectorXd> sumsq_x(np, VectorXd::Zero(n)); // componentwise sum of squares
    std::vector<double> sumsq_x2(np, 0.0);                // sum of |x|^4
    std::vector<VectorXd> sumsq_u(np - 1, VectorXd::Zero(m));
    std::vector<double> sumsq_u2(np - 1, 0.0);

    for (const PathResult& path : ensemble.paths) { // fixed order: path index
        for (size_t k = 0; k < np; ++k) {
            const VectorXd& x = path.x[k];
            const double xsq = x.squaredNorm();
            s.mean_x[k] += x;
            s.second_x[k] += xsq;
            sumsq_x[k] += x.cwiseProduct(x);
            sumsq_x2[k] += xsq * xsq;
        }
        for (size_t k = 0; k + 1 < np; ++k) {
            const VectorXd& u = path.u[k];
            const double usq = u.squaredNorm();
            s.mean_u[k] += u;
            s.second_u[k] += usq;
            sumsq_u[k] += u.cwiseProduct(u);
            sumsq_u2[k] += usq * usq;
        }
    }

    const double inv_m = 1.0 / M;
    const auto se_scalar = [&](double sum, double sum_sq) {
        if (M < 2) return 0.0;
        const double var = std::max(0.0, (sum_sq - sum * sum * inv_m) / (M - 1));
        return std::sqrt(var * inv_m);
    };
    for (size_t k = 0; k < np; ++k) {
        VectorXd se = VectorXd::Zero(n);
        for (int c = 0; c < n; ++c) {
            se(c) = se_scalar(s.mean_x[k](c), sumsq_x[k](c));
        }
        s.se_second_x[k] = se_scalar(s.second_x[k], sumsq_x2[k]);
        s.mean_x[k] *= inv_m;
        s.second_x[k] *= inv_m;
        s.se_mean_x[k] = se;
    }
    for (size_t k = 0; k + 1 < np; ++k) {
        VectorXd se = VectorXd::Zero(m);
        for (int c = 0; c < m; ++c) {
            se(c) = se_scalar(s.mean_u[k](c), sumsq_u[k](c));
        }
        s.se_second_u[k] = se_scalar(s.second_u[k], sumsq_u2[k]);
        s.mean_u[k] *= inv_m;
        s.second_u[k] *= inv_m;
        s.se_mean_u[k] = se;
    }
    return s;
}

} // namespace

MonteCarloResult monte_carlo(const ProblemData& p, const FeedbackPolicy& policy,
                             const MeanTrajectory& means, int num_paths, std::uint64_t seed,
                             MonteCarloOptions opts) {
    if (num_paths < 1) throw DomainError("need at least one path");
    const TimeMesh& mesh = policy.mesh;

    MonteCarloResult result;
    result.ensemble.mesh = mesh;
    result.ensemble.seed = seed;
    result.ensemble.paths.resize(static_cast<size_t>(num_paths));
    result.ensemble.increments.resize(static_cast<size_t>(num_paths));

    const auto run_range = [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            std::vector<double> dw =
                opts.zero_noise ? std::vector<double>(static_cast<size_t>(mesh.steps), 0.0)
                                : fine_increments(seed, static_cast<std::uint64_t>(i), mesh);
            result.ensemble.paths[static_cast<size_t>(i)] = simulate_path(p, policy, means, dw);
            result.ensemble.increments[static_cast<size_t>(i)] = std::move(dw);
        }
    };

    int workers = opts.workers;
    if (workers <= 0) {
        workers = static_cast<int>(std::thread::hardware_concurrency());
        workers = std::clamp(workers, 1, 8);
    }
    workers = std::min(workers, num_paths);

    if (workers == 1) {
        run_range(0, num_paths);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(workers));
        const int chunk = (num_paths + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const int begin = w * chunk;
            const int end = std::min(num_paths, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(run_range, begin, end);
        }
        for (auto& t : pool) t.join();
    }

    result.summary = summarize(result.ensemble, p.n, p.m);
    return result;
}

CostReport discrete_cost(const ProblemData& p, const PathEnsemble& ensemble,
                         const MeanTrajectory& means) {
    const TimeMesh& mesh = ensemble.mesh;
    if (!(means.mesh == mesh)) throw MeshMismatch("ensemble and means must share one mesh");
    if (ensemble.paths.empty()) throw DomainError("cost needs at least one path");
    const double tau = mesh.tau();
    const int M = static_cast<int>(ensemble.paths.size());
    const int N = mesh.steps;

    double sum_q = 0, sum_r = 0, sum_g = 0;     // ensemble sums of the stochastic terms
    double sum_path = 0, sum_path_sq = 0;       // per-path stochastic totals, for the SE
    for (const PathResult& path : ensemble.paths) {
        double path_q = 0, path_r = 0;
        for (int k = 0; k < N; ++k) {
            const VectorXd& x = path.x[static_cast<size_t>(k)];
            const VectorXd& u = path.u[static_cast<size_t>(k)];
            path_q += x.dot(p.Q * x);
            path_r += u.dot(p.R * u);
        }
        const VectorXd& xN = path.x[static_cast<size_t>(N)];
        const double path_g = xN.dot(p.G * xN);
        sum_q += path_q;
        sum_r += path_r;
        sum_g += path_g;
        const double total = tau * (path_q + path_r) + path_g;
        sum_path += total;
        sum_path_sq += total * total;
    }

    CostReport report;
    report.terms.q = tau * sum_q / M;
    report.terms.r = tau * sum_r / M;
    report.terms.g = sum_g / M;

    for (int k = 0; k < N; ++k) {
        const VectorXd& mx = means.mean_x[static_cast<size_t>(k)];
        const VectorXd& mu = means.mean_u[static_cast<size_t>(k)];
        report.terms.qbar += tau * mx.dot(p.Qbar * mx);
        report.terms.rbar += tau * mu.dot(p.Rbar * mu);
    }
    const VectorXd& mxN = means.mean_x[static_cast<size_t>(N)];
    report.terms.gbar = mxN.dot(p.Gbar * mxN);

    report.j_tau = report.terms.total();
    if (M >= 2) {
        const double var = std::max(0.0, (sum_path_sq - sum_path * sum_path / M) / (M - 1));
        report.standard_error = std::sqrt(var / M);
    }
    return report;
}

} // namespace mflq
