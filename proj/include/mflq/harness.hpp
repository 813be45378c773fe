#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mflq/analytic.hpp"
#include "mflq/core.hpp"

namespace mflq {

struct LevelEntry {
    int steps = 0; // N
    double tau = 0;
    double error = 0;
    double standard_error = 0; // 0 for deterministic metrics
    bool mc_limited = false;   // SE > 20% of the metric; excluded from the fit
};

struct RateFit {
    double slope = 0;
    double halfwidth = 0; // residual-based half width; 0 with two points
};

// Least squares of log2(error) against log2(tau). Throws DegenerateData when
// fewer than two points or any error is not strictly positive.
[[nodiscard]] RateFit estimate_rate(std::span<const double> errors, std::span<const double> taus);

struct RateReport {
    std::string metric;
    std::vector<LevelEntry> levels;
    double slope = 0;
    double slope_halfwidth = 0;
    int fitted_levels = 0;          // points that entered the fit
    bool degenerate = false;        // every level error is exactly zero
    bool insufficient_levels = false; // fewer than two usable points

    bool has_slope() const { return !degenerate && !insufficient_levels; }
};

struct HarnessOptions {
    int workers = 0; // <= 0: pick from hardware concurrency
};

// max_k ||P(t_k) - P_k|| and max_k ||Pi(t_k) - Pi_k|| per level, fitted.
// The first overload measures against the RK4 reference on n_ref steps
// (every level must divide n_ref); the second against a closed-form oracle.
[[nodiscard]] std::pair<RateReport, RateReport> riccati_convergence(const ProblemData& p,
                                                                    std::span<const int> levels,
                                                                    int n_ref);
[[nodiscard]] std::pair<RateReport, RateReport> riccati_convergence(const ProblemData& p,
                                                                    std::span<const int> levels,
                                                                    const ExactOracle& oracle);

// sup_k |E[x*(t_k)] - mean_x_k| and sup_k |E[u*(t_k)] - mean_u_k|.
// Deterministic: no Monte Carlo anywhere.
[[nodiscard]] std::pair<RateReport, RateReport> mean_convergence(const ProblemData& p,
                                                                 const ExactOracle& oracle,
                                                                 std::span<const int> levels);

// sup_k E|x*(t_k) - x_tau(t_k)|^2 and the same for u, with all levels sharing
// one fine Brownian grid per path (the finest level) so the error is
// measured pathwise.
[[nodiscard]] std::pair<RateReport, RateReport> strong_convergence(const ProblemData& p,
                                                                   const ExactOracle& oracle,
                                                                   std::span<const int> levels,
                                                                   int num_paths, std::uint64_t seed,
                                                                   HarnessOptions opts = {});

// Adjoint reconstruction error against the continuous identities
//   y = P (x*-E[x*]) + Pi E[x*],
//   z = P ( C(x*-E[x*]) + Chat E[x*] + D(u*-E[u*]) + Dhat E[u*] ).
// Mean metrics are deterministic; second moments use coupled Monte Carlo.
// The y second moment is reported for both fluctuation weights.
struct BsdeConvergence {
    RateReport mean_y;
    RateReport mean_z;
    RateReport second_y;    // P-weighted reconstruction (default)
    RateReport second_y_pi; // verbatim Pi-weighted reconstruction
    RateReport second_z;
};

[[nodiscard]] BsdeConvergence bsde_convergence(const ProblemData& p, const ExactOracle& oracle,
                                               std::span<const int> levels, int num_paths,
                                               std::uint64_t seed, HarnessOptions opts = {});

} // namespace mflq
