#pragma once

#include <functional>

#include "mflq/core.hpp"

namespace mflq {

// Scalar benchmark problem with closed-form solutions on [0, 1]:
// n = m = 1, A = 1, Bbar = Dbar = 1, Q = 1, Qbar = -1, R = 1, Rbar = -1/2,
// Gbar = 1, everything else zero, x0 = 1.
[[nodiscard]] ProblemData example_problem();

struct ExactValues {
    double p = 0;      // P(t)
    double pi = 0;     // Pi(t)
    double mean_x = 0; // E[x*(t)]
    double mean_u = 0; // E[u*(t)]
    double x_star = 0; // x*(t; W(t))
    double u_star = 0; // u*(t)
};

// Closed forms:
//   P(t)  = (e^{2-2t} - 1)/2,        Pi(t)   = e^{2-2t}/(3-2t),
//   E[x*] = (3-2t) e^t / 3,          E[u*]   = -(2/3) e^t,
//   x*(t) = (3-2t-2W(t)) e^t / 3,    u*(t)   = -(2/3) e^t.
// Throws DomainError for t outside [0, 1].
[[nodiscard]] ExactValues exact_values(double t, double w_t);

// Generic oracle interface consumed by the convergence harness. Closed forms
// exist only for the benchmark problem; tests may construct ad-hoc oracles
// (e.g. the all-zero one) through the same interface.
struct ExactOracle {
    std::function<MatrixXd(double)> riccati_p;           // P(t)
    std::function<MatrixXd(double)> riccati_pi;          // Pi(t)
    std::function<VectorXd(double)> mean_x;              // E[x*(t)]
    std::function<VectorXd(double)> mean_u;              // E[u*(t)]
    std::function<VectorXd(double, double)> path_x;      // x*(t; W(t))
    std::function<VectorXd(double, double)> path_u;      // u*(t; W(t))
};

[[nodiscard]] ExactOracle example_oracle();

} // namespace mflq
