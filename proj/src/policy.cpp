#include "mflq/policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mflq {

FeedbackPolicy synthesize_gains(const ProblemData& p, const HatCoefficients& hat,
                                const RiccatiSequence& P, const RiccatiSequence& Pi) {
    if (!(P.mesh == Pi.mesh)) throw MeshMismatch("P and Pi must share one mesh");
    const TimeMesh& mesh = P.mesh;
    const double tau = mesh.tau();
    const MatrixXd eye = MatrixXd::Identity(p.n, p.n);
    const MatrixXd drift = eye + p.A * tau;
    const MatrixXd drift_hat = eye + hat.A * tau;
    const MatrixXd R = symmetrize(p.R);

    FeedbackPolicy pol;
    pol.mesh = mesh;
    const size_t n_steps = static_cast<size_t>(mesh.steps);
    pol.W1.resize(n_steps);
    pol.H1.resize(n_steps);
    pol.W2.resize(n_steps);
    pol.H2.resize(n_steps);
    pol.K1.resize(n_steps);
    pol.K2.resize(n_steps);

    for (int k = 0; k < mesh.steps; ++k) {
        const MatrixXd& Pn = P.at(k + 1);
        const MatrixXd& Pin = Pi.at(k + 1);

        const MatrixXd W1 = R + p.B.transpose() * Pn * p.B * tau + p.D.transpose() * Pn * p.D;
        const MatrixXd H1 = p.B.transpose() * Pn * drift + p.D.transpose() * Pn * p.C;
        const MatrixXd W2 =
            hat.R + hat.B.transpose() * Pin * hat.B * tau + hat.D.transpose() * Pn * hat.D;
        const MatrixXd H2 = hat.B.transpose() * Pin * drift_hat + hat.D.transpose() * Pn * hat.C;

        const size_t i = static_cast<size_t>(k);
        try {
            pol.K1[i] = spd_solve(W1, H1);
            pol.K2[i] = spd_solve(W2, H2);
        } catch (const NotPositiveDefinite&) {
            throw NotPositiveDefinite("gain system lost positive definiteness at step " +
                                      std::to_string(k));
        }
        pol.W1[i] = SymMatrix(W1);
        pol.H1[i] = H1;
        pol.W2[i] = SymMatrix(W2);
        pol.H2[i] = H2;
    }
    return pol;
}

VectorXd control_discrete(const FeedbackPolicy& policy, int k, const VectorXd& x,
                          const VectorXd& mean_x) {
    if (k < 0 || k >= policy.steps()) {
        throw IndexOutOfRange("control index " + std::to_string(k) + " outside [0, " +
                              std::to_string(policy.steps() - 1) + "]");
    }
    const size_t i = static_cast<size_t>(k);
    return -policy.K1[i] * (x - mean_x) - policy.K2[i] * mean_x;
}

VectorXd control_continuous(const ProblemData& p, const HatCoefficients& hat,
                            const ContinuousRiccatiReference& ref, double t, const VectorXd& x,
                            const VectorXd& mean_x) {
    const TimeMesh& mesh = ref.mesh();
    const int j = std::clamp(static_cast<int>(std::lround(t / mesh.tau())), 0, mesh.steps);
    const MatrixXd& P = ref.p.at(j);
    const MatrixXd& Pi = ref.pi.at(j);

    const MatrixXd sigma0 = p.R + p.D.transpose() * P * p.D;
    const MatrixXd fluct_gain = spd_solve(sigma0, p.B.transpose() * P + p.D.transpose() * P * p.C);
    const MatrixXd sigma1 = hat.R + hat.D.transpose() * P * hat.D;
    const MatrixXd mean_gain =
        spd_solve(sigma1, hat.B.transpose() * Pi + hat.D.transpose() * P * hat.C);
    return -fluct_gain * (x - mean_x) - mean_gain * mean_x;
}

} // namespace mflq
