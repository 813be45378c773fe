#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mflq/core.hpp"
#include "mflq/policy.hpp"

namespace mflq {

// Deterministic mean recursion, the first pass of the two-pass simulation:
//   E[x(t_{k+1})] = (I + Ahat tau - tau Bhat K2_k) E[x(t_k)],
//   E[u(t_k)]     = -K2_k E[x(t_k)].
struct MeanTrajectory {
    TimeMesh mesh;
    std::vector<VectorXd> mean_x; // N+1
    std::vector<VectorXd> mean_u; // N
};

[[nodiscard]] MeanTrajectory mean_recursion(const ProblemData& p, const HatCoefficients& hat,
                                            const FeedbackPolicy& policy);

struct PathResult {
    std::vector<VectorXd> x; // N+1
    std::vector<VectorXd> u; // N
};

// One Euler path of the closed-loop mean-field difference equation. The
// deterministic means stand in for E[x], E[u]; never empirical averages.
[[nodiscard]] PathResult simulate_path(const ProblemData& p, const FeedbackPolicy& policy,
                                       const MeanTrajectory& means,
                                       std::span<const double> increments);

struct PathEnsemble {
    TimeMesh mesh;
    std::uint64_t seed = 0;
    std::vector<PathResult> paths;
    std::vector<std::vector<double>> increments; // per path, N values
};

// Per-time empirical moments with standard errors. Second moments use the
// plain 1/M estimator; standard errors use 1/(M-1).
struct MomentSummary {
    TimeMesh mesh;
    std::vector<VectorXd> mean_x;    // N+1
    std::vector<double> second_x;    // E|x|^2
    std::vector<VectorXd> mean_u;    // N
    std::vector<double> second_u;    // E|u|^2
    std::vector<VectorXd> se_mean_x; // N+1
    std::vector<double> se_second_x;
    std::vector<VectorXd> se_mean_u; // N
    std::vector<double> se_second_u;
};

struct MonteCarloOptions {
    int workers = 0;         // <= 0: pick from hardware concurrency
    bool zero_noise = false; // debug switch: force all increments to zero
};

struct MonteCarloResult {
    PathEnsemble ensemble;
    MomentSummary summary;
};

// Runs simulate_path for path_id = 0..M-1. Deterministic given (seed, M)
// regardless of worker count; summaries reduce in path-index order.
[[nodiscard]] MonteCarloResult monte_carlo(const ProblemData& p, const FeedbackPolicy& policy,
                                           const MeanTrajectory& means, int num_paths,
                                           std::uint64_t seed, MonteCarloOptions opts = {});

struct CostTerms {
    double q = 0, qbar = 0, r = 0, rbar = 0, g = 0, gbar = 0;

    double total() const { return q + qbar + r + rbar + g + gbar; }
};

struct CostReport {
    double j_tau = 0;
    double standard_error = 0;
    CostTerms terms;
};

// Discrete cost: J = tau * sum_k ( E<Qx,x> + <Qbar m_x, m_x> + E<Ru,u>
// + <Rbar m_u, m_u> ) + E<Gx_N,x_N> + <Gbar m_x[N], m_x[N]>, expectations by
// ensemble average; standard error from the path-wise stochastic terms.
[[nodiscard]] CostReport discrete_cost(const ProblemData& p, const PathEnsemble& ensemble,
                                       const MeanTrajectory& means);

} // namespace mflq
