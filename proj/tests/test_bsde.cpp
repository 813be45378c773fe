#include <doctest.h>

#include <cmath>

#include "mflq/analytic.hpp"
#include "mflq/bsde.hpp"
#include "mflq/rng.hpp"
#include "test_util.hpp"

using namespace mflq;

namespace {

struct Setup {
    ProblemData p;
    HatCoefficients hat;
    TimeMesh mesh;
    RiccatiSequence P;
    RiccatiSequence Pi;
    FeedbackPolicy policy;
    MeanTrajectory means;
};

Setup make_setup(const ProblemData& p, int steps) {
    Setup s{p, hat_transform(p), make_mesh(steps, p.T), {}, {}, {}, {}};
    s.P = solve_p_difference(s.p, s.mesh);
    s.Pi = solve_pi_difference(s.p, s.hat, s.mesh, s.P);
    s.policy = synthesize_gains(s.p, s.hat, s.P, s.Pi);
    s.means = mean_recursion(s.p, s.hat, s.policy);
    return s;
}

} // namespace

TEST_CASE("adjoint means vanish with a zero initial state") {
    ProblemData p = example_problem();
    p.x0(0) = 0.0;
    const Setup s = make_setup(p, 16);
    const AdjointMeans am = reconstruct_means(s.P, s.Pi, s.hat, s.means);
    for (int k = 0; k < 16; ++k) {
        CHECK(am.mean_y[static_cast<size_t>(k)].cwiseAbs().maxCoeff() == 0.0);
        CHECK(am.mean_z[static_cast<size_t>(k)].cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("adjoint means at t=0 approach the closed forms") {
    const Setup s = make_setup(example_problem(), 1 << 10);
    const AdjointMeans am = reconstruct_means(s.P, s.Pi, s.hat, s.means);
    const double e2 = std::exp(2.0);
    CHECK(std::abs(am.mean_y[0](0) - e2 / 3.0) < 0.02);
    CHECK(std::abs(am.mean_z[0](0) + (e2 - 1.0) / 3.0) < 0.03);
}

TEST_CASE("zero fluctuation collapses the adjoint path onto its means") {
    const Setup s = make_setup(example_problem(), 16);
    const std::vector<double> zeros(16, 0.0);
    const PathResult path = simulate_path(s.p, s.policy, s.means, zeros);
    const AdjointPath ap = reconstruct_path(s.P, s.Pi, s.hat, s.p, path, s.means);
    for (int k = 0; k < 16; ++k) {
        const size_t i = static_cast<size_t>(k);
        CHECK(ap.y[i] == ap.mean_y[i]);
        CHECK(ap.z[i] == ap.mean_z[i]);
    }
}

TEST_CASE("z has no fluctuation channel when C = D = 0") {
    const Setup s = make_setup(example_problem(), 32);
    const PathResult path = simulate_path(s.p, s.policy, s.means, fine_increments(3, 0, s.mesh));
    const AdjointPath ap = reconstruct_path(s.P, s.Pi, s.hat, s.p, path, s.means);
    for (int k = 0; k < 32; ++k) {
        const size_t i = static_cast<size_t>(k);
        CHECK(ap.z[i] == ap.mean_z[i]);
        // the path really is noisy, so y does fluctuate
        if (k > 0) CHECK(ap.y[i] != ap.mean_y[i]);
    }
}

TEST_CASE("reconstruction matches the continuous identity along a noisy path") {
    const Setup s = make_setup(example_problem(), 1 << 10);
    const PathResult path = simulate_path(s.p, s.policy, s.means, fine_increments(5, 2, s.mesh));
    const AdjointPath ap = reconstruct_path(s.P, s.Pi, s.hat, s.p, path, s.means);
    for (int k = 0; k < s.mesh.steps; k += 8) {
        const size_t i = static_cast<size_t>(k);
        const ExactValues v = exact_values(s.mesh.t(k), 0.0);
        const double x = path.x[i](0);
        const double m = s.means.mean_x[i](0);
        const double ident = v.p * (x - m) + v.pi * m;
        CHECK(std::abs(ap.y[i](0) - ident) <= 0.05 * (1.0 + std::abs(x)));
    }
}

TEST_CASE("reconstruction is linear in the path fluctuation") {
    std::mt19937_64 rng(73);
    const Setup s = make_setup(testutil::random_problem(rng, 2, 2), 16);
    const PathResult path = simulate_path(s.p, s.policy, s.means, fine_increments(9, 4, s.mesh));

    PathResult doubled = path;
    for (int k = 0; k <= 16; ++k) {
        const size_t i = static_cast<size_t>(k);
        doubled.x[i] = s.means.mean_x[i] + 2.0 * (path.x[i] - s.means.mean_x[i]);
    }
    for (int k = 0; k < 16; ++k) {
        const size_t i = static_cast<size_t>(k);
        doubled.u[i] = s.means.mean_u[i] + 2.0 * (path.u[i] - s.means.mean_u[i]);
    }

    const AdjointPath a = reconstruct_path(s.P, s.Pi, s.hat, s.p, path, s.means);
    const AdjointPath b = reconstruct_path(s.P, s.Pi, s.hat, s.p, doubled, s.means);
    for (int k = 0; k < 16; ++k) {
        const size_t i = static_cast<size_t>(k);
        const VectorXd lhs_y = b.y[i] - b.mean_y[i];
        const VectorXd rhs_y = 2.0 * (a.y[i] - a.mean_y[i]);
        CHECK((lhs_y - rhs_y).cwiseAbs().maxCoeff() < 1e-11);
        const VectorXd lhs_z = b.z[i] - b.mean_z[i];
        const VectorXd rhs_z = 2.0 * (a.z[i] - a.mean_z[i]);
        CHECK((lhs_z - rhs_z).cwiseAbs().maxCoeff() < 1e-11);
    }
}

TEST_CASE("fluctuation weight switch changes only y") {
    const Setup s = make_setup(example_problem(), 16);
    const PathResult path = simulate_path(s.p, s.policy, s.means, fine_increments(13, 1, s.mesh));
    const AdjointPath with_p = reconstruct_path(s.P, s.Pi, s.hat, s.p, path, s.means, YWeight::P);
    const AdjointPath with_pi = reconstruct_path(s.P, s.Pi, s.hat, s.p, path, s.means, YWeight::Pi);
    bool y_differs = false;
    for (int k = 0; k < 16; ++k) {
        const size_t i = static_cast<size_t>(k);
        CHECK(with_p.z[i] == with_pi.z[i]);
        CHECK(with_p.mean_y[i] == with_pi.mean_y[i]);
        if ((with_p.y[i] - with_pi.y[i]).cwiseAbs().maxCoeff() > 1e-12) y_differs = true;
    }
    CHECK(y_differs); // P(t) != Pi(t) on this problem and the path is noisy
}
