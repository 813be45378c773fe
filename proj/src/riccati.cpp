#include "mflq/riccati.hpp"

#include <cmath>

namespace mflq {

namespace {

constexpr double kBlowupLimit = 1e12;

bool is_power_of_two(int n) {
    return n > 0 && (n & (n - 1)) == 0;
}

} // namespace

double RiccatiSequence::min_eigenvalue_seen() const {
    double lo = 0.0;
    bool first = true;
    for (const auto& v : values) {
        const double eig = min_eigenvalue(v.mat());
        lo = first ? eig : std::min(lo, eig);
        first = false;
    }
    return lo;
}

RiccatiSequence solve_p_difference(const ProblemData& p, const TimeMesh& mesh) {
    const double tau = mesh.tau();
    const MatrixXd eye = MatrixXd::Identity(p.n, p.n);
    const MatrixXd drift = eye + p.A * tau; // I + A*tau
    const MatrixXd Q = symmetrize(p.Q);
    const MatrixXd R = symmetrize(p.R);

    RiccatiSequence seq;
    seq.mesh = mesh;
    seq.values.resize(static_cast<size_t>(mesh.steps) + 1);
    seq.values[static_cast<size_t>(mesh.steps)] = SymMatrix(symmetrize(p.G));

    for (int k = mesh.steps - 1; k >= 0; --k) {
        const MatrixXd& next = seq.at(k + 1);
        const MatrixXd W1 = R + p.B.transpose() * next * p.B * tau + p.D.transpose() * next * p.D;
        const MatrixXd H1 = p.B.transpose() * next * drift + p.D.transpose() * next * p.C;
        MatrixXd gain;
        try {
            gain = spd_solve(W1, H1);
        } catch (const NotPositiveDefinite&) {
            throw NotPositiveDefinite("W1 lost positive definiteness at step " + std::to_string(k));
        }
        const MatrixXd Pk = tau * Q + drift.transpose() * next * drift +
                            tau * p.C.transpose() * next * p.C - tau * H1.transpose() * gain;
        if (Pk.cwiseAbs().maxCoeff() > kBlowupLimit) {
            throw StepUnstable("P recursion exceeded 1e12 at step " + std::to_string(k));
        }
        seq.values[static_cast<size_t>(k)] = SymMatrix(Pk);
    }
    return seq;
}

TildeCoefficients tilde_discrete([[maybe_unused]] const ProblemData& p,
                                 const HatCoefficients& hat, const RiccatiSequence& P) {
    const int N = P.mesh.steps;
    TildeCoefficients tc;
    tc.mesh = P.mesh;
    tc.Bt = hat.B;
    tc.Gt = hat.G;
    tc.Qt.resize(static_cast<size_t>(N) + 1);
    tc.Rt.resize(static_cast<size_t>(N) + 1);
    tc.At.resize(static_cast<size_t>(N) + 1);

    for (int k = 0; k <= N; ++k) {
        const MatrixXd& Pk = P.at(k);
        const MatrixXd Rt = hat.R + hat.D.transpose() * Pk * hat.D;
        const MatrixXd coupling = hat.D.transpose() * Pk * hat.C; // m x n
        MatrixXd solved; // Rt^{-1} Dhat^T P_k Chat
        try {
            solved = spd_solve(Rt, coupling);
        } catch (const NotPositiveDefinite&) {
            throw NotPositiveDefinite("Rhat + Dhat^T P Dhat lost positive definiteness at step " +
                                      std::to_string(k));
        }
        tc.Rt[static_cast<size_t>(k)] = SymMatrix(Rt);
        tc.Qt[static_cast<size_t>(k)] =
            SymMatrix(hat.Q + hat.C.transpose() * Pk * hat.C - coupling.transpose() * solved);
        tc.At[static_cast<size_t>(k)] = hat.A - hat.B * solved;
    }
    return tc;
}

RiccatiSequence solve_pi_difference(const ProblemData& p, const HatCoefficients& hat,
                                    const TimeMesh& mesh, const RiccatiSequence& P) {
    if (!(P.mesh == mesh)) throw MeshMismatch("P must be solved on the same mesh");
    const double tau = mesh.tau();
    const MatrixXd eye = MatrixXd::Identity(p.n, p.n);
    const TildeCoefficients tc = tilde_discrete(p, hat, P);

    RiccatiSequence seq;
    seq.mesh = mesh;
    seq.values.resize(static_cast<size_t>(mesh.steps) + 1);
    seq.values[static_cast<size_t>(mesh.steps)] = SymMatrix(tc.Gt);

    for (int k = mesh.steps - 1; k >= 0; --k) {
        const MatrixXd& next = seq.at(k + 1);
        const MatrixXd drift = eye + tc.At[static_cast<size_t>(k)] * tau;
        const MatrixXd W = tc.Rt[static_cast<size_t>(k)].mat() + tau * tc.Bt.transpose() * next * tc.Bt;
        const MatrixXd H = tc.Bt.transpose() * next * drift;
        MatrixXd gain;
        try {
            gain = spd_solve(W, H);
        } catch (const NotPositiveDefinite&) {
            throw NotPositiveDefinite("W lost positive definiteness at step " + std::to_string(k));
        }
        const MatrixXd Pik = drift.transpose() * next * drift +
                             tau * tc.Qt[static_cast<size_t>(k)].mat() - tau * H.transpose() * gain;
        if (Pik.cwiseAbs().maxCoeff() > kBlowupLimit) {
            throw StepUnstable("Pi recursion exceeded 1e12 at step " + std::to_string(k));
        }
        seq.values[static_cast<size_t>(k)] = SymMatrix(Pik);
    }
    return seq;
}

namespace {

// Right-hand sides of the two differential Riccati equations written forward
// in time; both are integrated together so the Pi equation sees the P stage
// values directly.
struct RiccatiRhs {
    const ProblemData& p;
    const HatCoefficients& hat;
    MatrixXd Q, Qhat; // symmetrized weights

    RiccatiRhs(const ProblemData& prob, const HatCoefficients& h)
        : p(prob), hat(h), Q(symmetrize(prob.Q)), Qhat(h.Q) {}

    void eval(const MatrixXd& P, const MatrixXd& Pi, MatrixXd& dP, MatrixXd& dPi) const {
        const MatrixXd sigma0 = p.R + p.D.transpose() * P * p.D;
        const MatrixXd L0 = p.B.transpose() * P + p.D.transpose() * P * p.C;
        dP = -(P * p.A + p.A.transpose() * P + p.C.transpose() * P * p.C + Q) +
             L0.transpose() * spd_solve(sigma0, L0);

        const MatrixXd sigma1 = hat.R + hat.D.transpose() * P * hat.D;
        const MatrixXd L1 = hat.B.transpose() * Pi + hat.D.transpose() * P * hat.C;
        dPi = -(Pi * hat.A + hat.A.transpose() * Pi + hat.C.transpose() * P * hat.C + Qhat) +
              L1.transpose() * spd_solve(sigma1, L1);
    }
};

} // namespace

ContinuousRiccatiReference solve_continuous_reference(const ProblemData& p,
                                                      const HatCoefficients& hat, int n_ref) {
    if (!is_power_of_two(n_ref) || n_ref < (1 << 12)) {
        throw DomainError("reference grid must be a power of two >= 2^12");
    }
    const TimeMesh mesh = make_mesh(n_ref, p.T);
    const double h = -mesh.tau(); // backward in time

    ContinuousRiccatiReference ref;
    ref.p.mesh = mesh;
    ref.pi.mesh = mesh;
    ref.p.values.resize(static_cast<size_t>(n_ref) + 1);
    ref.pi.values.resize(static_cast<size_t>(n_ref) + 1);

    const RiccatiRhs rhs(p, hat);
    MatrixXd P = symmetrize(p.G);
    MatrixXd Pi = hat.G;
    ref.p.values[static_cast<size_t>(n_ref)] = SymMatrix(P);
    ref.pi.values[static_cast<size_t>(n_ref)] = SymMatrix(Pi);

    MatrixXd k1p, k1q, k2p, k2q, k3p, k3q, k4p, k4q;
    double min_eig = 0.0;
    for (int j = n_ref; j > 0; --j) {
        rhs.eval(P, Pi, k1p, k1q);
        rhs.eval(P + 0.5 * h * k1p, Pi + 0.5 * h * k1q, k2p, k2q);
        rhs.eval(P + 0.5 * h * k2p, Pi + 0.5 * h * k2q, k3p, k3q);
        rhs.eval(P + h * k3p, Pi + h * k3q, k4p, k4q);
        P = symmetrize(P + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p));
        Pi = symmetrize(Pi + (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q));
        if (P.cwiseAbs().maxCoeff() > kBlowupLimit || Pi.cwiseAbs().maxCoeff() > kBlowupLimit) {
            throw StepUnstable("reference integration exceeded 1e12 at step " + std::to_string(j - 1));
        }
        ref.p.values[static_cast<size_t>(j - 1)] = SymMatrix(P);
        ref.pi.values[static_cast<size_t>(j - 1)] = SymMatrix(Pi);
        min_eig = std::min({min_eig, min_eigenvalue(P), min_eigenvalue(Pi)});
    }
    ref.psd_flagged = min_eig < -kPsdTol * (1.0 + std::max(spectral_norm(ref.p.at(0)),
                                                           spectral_norm(ref.pi.at(0))));
    return ref;
}

double riccati_error(const RiccatiSequence& seq, const RiccatiSequence& ref) {
    if (!is_nested(seq.mesh, ref.mesh)) {
        throw MeshMismatch("coarse mesh does not nest into the reference mesh");
    }
    const int stride = ref.mesh.steps / seq.mesh.steps;
    double err = 0.0;
    for (int k = 0; k <= seq.mesh.steps; ++k) {
        err = std::max(err, spectral_norm(ref.at(k * stride) - seq.at(k)));
    }
    return err;
}

} // namespace mflq
