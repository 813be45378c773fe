#include "mflq/bsde.hpp"

namespace mflq {

AdjointMeans reconstruct_means(const RiccatiSequence& P, const RiccatiSequence& Pi,
                               const HatCoefficients& hat, const MeanTrajectory& means) {
    if (!(P.mesh == Pi.mesh) || !(P.mesh == means.mesh)) {
        throw MeshMismatch("Riccati sequences and means must live on one mesh");
    }
    const int N = P.mesh.steps;

    AdjointMeans out;
    out.mesh = P.mesh;
    out.mean_y.resize(static_cast<size_t>(N));
    out.mean_z.resize(static_cast<size_t>(N));
    for (int k = 0; k < N; ++k) {
        const size_t i = static_cast<size_t>(k);
        out.mean_y[i] = Pi.at(k) * means.mean_x[i];
        out.mean_z[i] = P.at(k) * (hat.C * means.mean_x[i] + hat.D * means.mean_u[i]);
    }
    return out;
}

AdjointPath reconstruct_path(const RiccatiSequence& P, const RiccatiSequence& Pi,
                             const HatCoefficients& hat, const ProblemData& p,
                             const PathResult& path, const MeanTrajectory& means, YWeight weight) {
    return reconstruct_path(P, Pi, p, path, means, reconstruct_means(P, Pi, hat, means), weight);
}

AdjointPath reconstruct_path(const RiccatiSequence& P, const RiccatiSequence& Pi,
                             const ProblemData& p, const PathResult& path,
                             const MeanTrajectory& means, const AdjointMeans& adjoint_means,
                             YWeight weight) {
    const int N = P.mesh.steps;
    if (path.x.size() != static_cast<size_t>(N) + 1) {
        throw MeshMismatch("path must live on the Riccati mesh");
    }

    AdjointPath out;
    out.mesh = P.mesh;
    out.y.resize(static_cast<size_t>(N));
    out.z.resize(static_cast<size_t>(N));
    for (int k = 0; k < N; ++k) {
        const size_t i = static_cast<size_t>(k);
        const VectorXd dx = path.x[i] - means.mean_x[i];
        const VectorXd du = path.u[i] - means.mean_u[i];
        const MatrixXd& fluct_weight = (weight == YWeight::P) ? P.at(k) : Pi.at(k);
        out.y[i] = fluct_weight * dx + adjoint_means.mean_y[i];
        out.z[i] = P.at(k) * (p.C * dx + p.D * du) + adjoint_means.mean_z[i];
    }
    out.mean_y = adjoint_means.mean_y;
    out.mean_z = adjoint_means.mean_z;
    return out;
}

} // namespace mflq
