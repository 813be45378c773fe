#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "mflq/errors.hpp"

namespace mflq {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Tolerances used across the library.
inline constexpr double kSymmetryTol = 1e-12; // ||M - M^T||_max <= tol*(1+||M||_max)
inline constexpr double kPsdTol = 1e-10;      // lambda_min >= -tol*(1+||M||) for >= 0
inline constexpr double kPdTol = 1e-10;       // lambda_min >= +tol for > 0

[[nodiscard]] MatrixXd symmetrize(const MatrixXd& m);
[[nodiscard]] bool is_symmetric_within_tol(const MatrixXd& m);

// Matrix norm of the whole library: ||M|| = sqrt(rho(M^T M)), computed from
// the symmetric eigenproblem of M^T M.
[[nodiscard]] double spectral_norm(const MatrixXd& m);

// Smallest eigenvalue of a symmetric matrix.
[[nodiscard]] double min_eigenvalue(const MatrixXd& sym);

[[nodiscard]] bool is_psd(const MatrixXd& sym);
[[nodiscard]] bool is_pd(const MatrixXd& sym);

// Square matrix made exactly symmetric on construction ((M+M^T)/2).
class SymMatrix {
public:
    SymMatrix() = default;
    SymMatrix(const MatrixXd& raw); // NOLINT(google-explicit-constructor)

    const MatrixXd& mat() const { return m_; }
    operator const MatrixXd&() const { return m_; }

    Eigen::Index size() const { return m_.rows(); }

private:
    MatrixXd m_;
};

// Uniform mesh 0 = t_0 < t_1 < ... < t_N = T with step tau = T/N.
struct TimeMesh {
    int steps = 0;      // N
    double horizon = 0; // T

    double tau() const { return horizon / steps; }
    double t(int k) const { return (k * horizon) / steps; }

    // Left-endpoint index map: floor(t/tau) clamped to [0, N-1].
    int index_of(double time) const;

    bool operator==(const TimeMesh&) const = default;
};

// Throws DomainError unless steps >= 1, horizon > 0 and tau <= 1.
[[nodiscard]] TimeMesh make_mesh(int steps, double horizon);

// True when `fine` refines `coarse` (same horizon, steps divide evenly).
[[nodiscard]] bool is_nested(const TimeMesh& coarse, const TimeMesh& fine);

// Full coefficient set of the controlled mean-field SDE and its cost.
struct ProblemData {
    int n = 0; // state dimension
    int m = 0; // control dimension
    double T = 0;
    VectorXd x0;

    MatrixXd A, Abar; // n x n drift
    MatrixXd B, Bbar; // n x m drift
    MatrixXd C, Cbar; // n x n diffusion
    MatrixXd D, Dbar; // n x m diffusion
    MatrixXd Q, Qbar; // n x n running state weight
    MatrixXd R, Rbar; // m x m running control weight
    MatrixXd G, Gbar; // n x n terminal weight
};

// All-zero problem of the given dimensions (weights included).
[[nodiscard]] ProblemData zero_problem(int n, int m, double T);

// phi_hat = phi + phi_bar for phi = A, B, C, D, Q, R, G.
struct HatCoefficients {
    MatrixXd A, B, C, D, Q, R, G;
};

struct ConditionCheck {
    std::string name;
    double min_eigenvalue = 0;
    bool pass = false;
};

struct ValidationReport {
    std::vector<ConditionCheck> conditions;
    bool pass = false;

    // First failing condition, or nullptr when everything passed.
    const ConditionCheck* first_failure() const;
};

// Checks shapes, finiteness, symmetry of the weight matrices and the six
// definiteness conditions Q >= 0, Q+Qbar >= 0, G >= 0, G+Gbar >= 0, R > 0,
// R+Rbar > 0. Shape/finiteness/symmetry problems throw; definiteness results
// are reported, not thrown.
ValidationReport validate_problem(const ProblemData& p);

// validate_problem + throw AssumptionViolated on the first failing condition.
void require_valid(const ProblemData& p);

[[nodiscard]] HatCoefficients hat_transform(const ProblemData& p);

// Solves W X = H for symmetric positive definite W via Cholesky with one step
// of iterative refinement; never forms W^{-1}. Throws NotPositiveDefinite if
// the factorization fails.
[[nodiscard]] MatrixXd spd_solve(const MatrixXd& W, const MatrixXd& H);

// Problem JSON: integer "n", "m", real "T", array "x0" (length n), one
// row-major array per matrix under its coefficient name. Missing matrix keys
// default to zeros of the correct shape.
[[nodiscard]] ProblemData parse_problem_json(const std::string& text);
[[nodiscard]] ProblemData load_problem_file(const std::string& path);

} // namespace mflq
