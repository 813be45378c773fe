#pragma once

#include <random>

#include "mflq/analytic.hpp"
#include "mflq/core.hpp"

namespace testutil {

inline mflq::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    mflq::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) m(i, j) = dist(rng);
    }
    return m;
}

inline mflq::MatrixXd random_psd(std::mt19937_64& rng, int n, double scale = 1.0) {
    const mflq::MatrixXd m = random_matrix(rng, n, n, scale);
    return m.transpose() * m;
}

inline mflq::MatrixXd random_spd(std::mt19937_64& rng, int n, double ridge = 0.3) {
    return random_psd(rng, n) + ridge * mflq::MatrixXd::Identity(n, n);
}

// Random problem satisfying the definiteness conditions: the barred weights
// are indefinite but keep plain+barred semidefinite.
inline mflq::ProblemData random_problem(std::mt19937_64& rng, int n, int m) {
    mflq::ProblemData p = mflq::zero_problem(n, m, 1.0);
    for (int i = 0; i < n; ++i) p.x0(i) = random_matrix(rng, 1, 1)(0, 0);
    p.A = random_matrix(rng, n, n);
    p.Abar = random_matrix(rng, n, n);
    p.B = random_matrix(rng, n, m);
    p.Bbar = random_matrix(rng, n, m);
    p.C = random_matrix(rng, n, n, 0.5);
    p.Cbar = random_matrix(rng, n, n, 0.5);
    p.D = random_matrix(rng, n, m, 0.5);
    p.Dbar = random_matrix(rng, n, m, 0.5);
    p.Q = random_psd(rng, n);
    p.Qbar = random_psd(rng, n) - 0.5 * p.Q;
    p.G = random_psd(rng, n);
    p.Gbar = random_psd(rng, n) - 0.5 * p.G;
    p.R = random_spd(rng, m);
    p.Rbar = random_psd(rng, m) - 0.5 * p.R;
    return p;
}

// All-zero problem with identity R so it passes validation; x0 optional.
inline mflq::ProblemData trivial_problem(int n = 1, int m = 1) {
    mflq::ProblemData p = mflq::zero_problem(n, m, 1.0);
    p.R = mflq::MatrixXd::Identity(m, m);
    return p;
}

// Oracle that is identically zero, for degenerate-study tests.
inline mflq::ExactOracle zero_oracle(int n, int m) {
    mflq::ExactOracle oracle;
    oracle.riccati_p = [n](double) { return mflq::MatrixXd::Zero(n, n); };
    oracle.riccati_pi = [n](double) { return mflq::MatrixXd::Zero(n, n); };
    oracle.mean_x = [n](double) { return mflq::VectorXd::Zero(n); };
    oracle.mean_u = [m](double) { return mflq::VectorXd::Zero(m); };
    oracle.path_x = [n](double, double) { return mflq::VectorXd::Zero(n); };
    oracle.path_u = [m](double, double) { return mflq::VectorXd::Zero(m); };
    return oracle;
}

} // namespace testutil
