#pragma once

#include <vector>

#include "mflq/core.hpp"

namespace mflq {

// Backward Riccati solution sampled forward-indexed: values[k] lives at t_k,
// k = 0..N. The terminal entry equals the prescribed terminal matrix exactly.
struct RiccatiSequence {
    TimeMesh mesh;
    std::vector<SymMatrix> values; // N+1 entries

    const MatrixXd& at(int k) const { return values[static_cast<size_t>(k)].mat(); }

    // Smallest eigenvalue over all entries. Advisory during the recursion;
    // the invariant suite enforces PSD on top of it.
    double min_eigenvalue_seen() const;
};

// Per-step coefficients of the auxiliary deterministic problem, built from
// the P-sequence: Qt_k, Rt_k, At_k for k = 0..N, plus the constant Bt = Bhat
// and Gt = Ghat. Rt_k coincides with Sigma1 evaluated at P_k.
struct TildeCoefficients {
    TimeMesh mesh;
    std::vector<SymMatrix> Qt; // n x n, PSD
    std::vector<SymMatrix> Rt; // m x m, PD (>= Rhat)
    std::vector<MatrixXd> At;  // n x n
    MatrixXd Bt;               // n x m
    MatrixXd Gt;               // n x n

    const MatrixXd& sigma1(int k) const { return Rt[static_cast<size_t>(k)].mat(); }
};

// Fine-grid RK4 solutions of the two differential Riccati equations, used as
// the reference ("continuous") trajectories.
struct ContinuousRiccatiReference {
    RiccatiSequence p;  // P(t_j)
    RiccatiSequence pi; // Pi(t_j)
    bool psd_flagged = false; // some eigenvalue dipped below the PSD tolerance

    const TimeMesh& mesh() const { return p.mesh; }
};

// Backward difference equation for P: P_N = G and
//   P_k = tau*Q + (I+A*tau)^T P_{k+1} (I+A*tau) + tau*C^T P_{k+1} C
//         - tau * H1_k^T (W1_k)^{-1} H1_k,
// with W1_k = R + B^T P_{k+1} B tau + D^T P_{k+1} D and
// H1_k = B^T P_{k+1} (I+A*tau) + D^T P_{k+1} C. Symmetrized every step.
[[nodiscard]] RiccatiSequence solve_p_difference(const ProblemData& p, const TimeMesh& mesh);

// Tilde coefficients at every grid point:
//   Rt_k = Rhat + Dhat^T P_k Dhat,
//   Qt_k = Qhat + Chat^T P_k Chat - Chat^T P_k Dhat Rt_k^{-1} Dhat^T P_k Chat,
//   At_k = Ahat - Bhat Rt_k^{-1} Dhat^T P_k Chat,  Bt = Bhat, Gt = Ghat.
[[nodiscard]] TildeCoefficients tilde_discrete(const ProblemData& p, const HatCoefficients& hat,
                                               const RiccatiSequence& P);

// Backward difference equation for Pi: Pi_N = Ghat and
//   Pi_k = (I+At_k tau)^T Pi_{k+1} (I+At_k tau) + tau*Qt_k - tau*H_k^T W_k^{-1} H_k,
// with H_k = Bt^T Pi_{k+1} (I+At_k tau), W_k = Rt_k + tau Bt^T Pi_{k+1} Bt.
// Note the recursion uses Rt_k (built from P_k), exactly as written.
[[nodiscard]] RiccatiSequence solve_pi_difference(const ProblemData& p, const HatCoefficients& hat,
                                                  const TimeMesh& mesh, const RiccatiSequence& P);

// Integrates both differential Riccati equations backward from T as one
// coupled system with classical fourth-order Runge-Kutta on a fine uniform
// grid, so the stage values of P feeding the Pi equation are the RK4 stage
// values themselves. n_ref must be a power of two >= 2^12.
[[nodiscard]] ContinuousRiccatiReference solve_continuous_reference(const ProblemData& p,
                                                                    const HatCoefficients& hat,
                                                                    int n_ref);

// max_k || ref(t_k) - seq_k || in spectral norm over coincident grid times.
// Throws MeshMismatch unless the coarse grid nests into the reference grid.
[[nodiscard]] double riccati_error(const RiccatiSequence& seq, const RiccatiSequence& ref);

} // namespace mflq
