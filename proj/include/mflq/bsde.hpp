#pragma once

#include <vector>

#include "mflq/core.hpp"
#include "mflq/riccati.hpp"
#include "mflq/simulate.hpp"

namespace mflq {

// Weight applied to the state fluctuation in the y reconstruction. The
// continuous identity weights it with P; the verbatim discrete formula
// weights it with Pi. Both are exposed so the discrepancy is measurable.
enum class YWeight { P, Pi };

// Deterministic adjoint means, one entry per step k = 0..N-1:
//   mean_y_k = Pi_k E[x(t_k)],
//   mean_z_k = P_k ( Chat E[x(t_k)] + Dhat E[u(t_k)] ).
struct AdjointMeans {
    TimeMesh mesh;
    std::vector<VectorXd> mean_y;
    std::vector<VectorXd> mean_z;
};

[[nodiscard]] AdjointMeans reconstruct_means(const RiccatiSequence& P, const RiccatiSequence& Pi,
                                             const HatCoefficients& hat,
                                             const MeanTrajectory& means);

// Adjoint pair along one simulated path, k = 0..N-1:
//   y_k = W_k (x_k - E[x_k]) + mean_y_k   (W = P or Pi per the weight switch)
//   z_k = P_k ( C (x_k - E[x_k]) + D (u_k - E[u_k]) ) + mean_z_k.
struct AdjointPath {
    TimeMesh mesh;
    std::vector<VectorXd> y;
    std::vector<VectorXd> z;
    std::vector<VectorXd> mean_y;
    std::vector<VectorXd> mean_z;
};

[[nodiscard]] AdjointPath reconstruct_path(const RiccatiSequence& P, const RiccatiSequence& Pi,
                                           const HatCoefficients& hat, const ProblemData& p,
                                           const PathResult& path, const MeanTrajectory& means,
                                           YWeight weight = YWeight::P);

// Same reconstruction with the adjoint means already computed (they do not
// depend on the path, so ensemble loops reuse them).
[[nodiscard]] AdjointPath reconstruct_path(const RiccatiSequence& P, const RiccatiSequence& Pi,
                                           const ProblemData& p, const PathResult& path,
                                           const MeanTrajectory& means,
                                           const AdjointMeans& adjoint_means, YWeight weight);

} // namespace mflq
