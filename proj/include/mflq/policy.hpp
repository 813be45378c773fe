#pragma once

#include <vector>

#include "mflq/core.hpp"
#include "mflq/riccati.hpp"

namespace mflq {

// Closed-loop gains for every step k = 0..N-1:
//   u(t_k) = -K1_k (x - E[x]) - K2_k E[x],
// with K1_k = (W1_k)^{-1} H1_k and K2_k = (W2_k)^{-1} H2_k.
struct FeedbackPolicy {
    TimeMesh mesh;
    std::vector<SymMatrix> W1; // m x m, SPD
    std::vector<MatrixXd> H1;  // m x n
    std::vector<SymMatrix> W2; // m x m, SPD
    std::vector<MatrixXd> H2;  // m x n
    std::vector<MatrixXd> K1;  // m x n
    std::vector<MatrixXd> K2;  // m x n

    int steps() const { return mesh.steps; }
};

// W1_k = R + B^T P_{k+1} B tau + D^T P_{k+1} D
// H1_k = B^T P_{k+1} (I + A tau) + D^T P_{k+1} C
// W2_k = Rhat + Bhat^T Pi_{k+1} Bhat tau + Dhat^T P_{k+1} Dhat
// H2_k = Bhat^T Pi_{k+1} (I + Ahat tau) + Dhat^T P_{k+1} Chat
[[nodiscard]] FeedbackPolicy synthesize_gains(const ProblemData& p, const HatCoefficients& hat,
                                              const RiccatiSequence& P, const RiccatiSequence& Pi);

// u = -K1_k (x - mean_x) - K2_k mean_x. Throws IndexOutOfRange unless
// 0 <= k <= N-1.
[[nodiscard]] VectorXd control_discrete(const FeedbackPolicy& policy, int k, const VectorXd& x,
                                        const VectorXd& mean_x);

// Continuous feedback law evaluated with the reference Riccati trajectories
// (nearest-grid-point lookup):
//   u = -Sigma0^{-1} (B^T P + D^T P C)(x - mean_x)
//       -Sigma1^{-1} (Bhat^T Pi + Dhat^T P Chat) mean_x.
[[nodiscard]] VectorXd control_continuous(const ProblemData& p, const HatCoefficients& hat,
                                          const ContinuousRiccatiReference& ref, double t,
                                          const VectorXd& x, const VectorXd& mean_x);

} // namespace mflq
