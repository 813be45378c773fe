#include "mflq/analytic.hpp"

#include <cmath>

namespace mflq {

ProblemData example_problem() {
    ProblemData p = zero_problem(1, 1, 1.0);
    p.x0(0) = 1.0;
    p.A(0, 0) = 1.0;
    p.Bbar(0, 0) = 1.0;
    p.Dbar(0, 0) = 1.0;
    p.Q(0, 0) = 1.0;
    p.Qbar(0, 0) = -1.0;
    p.R(0, 0) = 1.0;
    p.Rbar(0, 0) = -0.5;
    p.Gbar(0, 0) = 1.0;
    return p;
}

ExactValues exact_values(double t, double w_t) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw DomainError("closed forms are defined on [0, 1]");
    }
    const double e2 = std::exp(2.0 - 2.0 * t);
    const double et = std::exp(t);

    ExactValues v;
    v.p = 0.5 * (e2 - 1.0);
    v.pi = e2 / (3.0 - 2.0 * t);
    v.mean_x = (3.0 - 2.0 * t) * et / 3.0;
    v.mean_u = -(2.0 / 3.0) * et;
    v.x_star = (3.0 - 2.0 * t - 2.0 * w_t) * et / 3.0;
    v.u_star = v.mean_u;
    return v;
}

ExactOracle example_oracle() {
    const auto scalar = [](double value) { return VectorXd::Constant(1, value); };
    const auto matrix = [](double value) { return MatrixXd::Constant(1, 1, value); };

    ExactOracle oracle;
    oracle.riccati_p = [=](double t) { return matrix(exact_values(t, 0.0).p); };
    oracle.riccati_pi = [=](double t) { return matrix(exact_values(t, 0.0).pi); };
    oracle.mean_x = [=](double t) { return scalar(exact_values(t, 0.0).mean_x); };
    oracle.mean_u = [=](double t) { return scalar(exact_values(t, 0.0).mean_u); };
    oracle.path_x = [=](double t, double w) { return scalar(exact_values(t, w).x_star); };
    oracle.path_u = [=](double t, double w) { return scalar(exact_values(t, w).u_star); };
    return oracle;
}

} // namespace mflq
