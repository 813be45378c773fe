#include "mflq/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <thread>

#include "mflq/bsde.hpp"
#include "mflq/policy.hpp"
#include "mflq/riccati.hpp"
#include "mflq/rng.hpp"
#include "mflq/simulate.hpp"

namespace mflq {

namespace {

constexpr double kMcLimitedFraction = 0.2;
constexpr int kChunk = 256; // paths per reduction chunk, independent of workers

void check_levels(std::span<const int> levels) {
    if (levels.empty()) throw DegenerateData("need at least one level");
    for (size_t i = 0; i < levels.size(); ++i) {
        if (levels[i] < 1) throw DomainError("levels must be positive");
        if (i > 0 && levels[i] <= levels[i - 1]) {
            throw DomainError("levels must be strictly increasing");
        }
    }
}

// Fills slope fields from the usable levels (positive error, not MC-limited).
RateReport finalize(std::string metric, std::vector<LevelEntry> levels) {
    RateReport report;
    report.metric = std::move(metric);
    report.levels = std::move(levels);

    std::vector<double> errs, taus;
    bool any_positive = false;
    for (const LevelEntry& lv : report.levels) {
        if (lv.error > 0) any_positive = true;
        if (lv.error > 0 && !lv.mc_limited) {
            errs.push_back(lv.error);
            taus.push_back(lv.tau);
        }
    }
    report.degenerate = !any_positive;
    report.fitted_levels = static_cast<int>(errs.size());
    report.insufficient_levels = report.fitted_levels < 2;
    if (!report.degenerate && !report.insufficient_levels) {
        const RateFit fit = estimate_rate(errs, taus);
        report.slope = fit.slope;
        report.slope_halfwidth = fit.halfwidth;
    }
    return report;
}

void flag_mc_limited(std::vector<LevelEntry>& levels) {
    for (LevelEntry& lv : levels) {
        lv.mc_limited = lv.error > 0 && lv.standard_error > kMcLimitedFraction * lv.error;
    }
}

int pick_workers(int requested) {
    if (requested > 0) return requested;
    const int hw = static_cast<int>(std::thread::hardware_concurrency());
    return std::clamp(hw, 1, 8);
}

// Runs fn(chunk_index, begin, end) over path chunks of fixed size kChunk.
// Chunk boundaries do not depend on the worker count, so per-chunk partial
// sums can be reduced in chunk order with bit-identical results.
void run_chunked(int num_paths, int workers,
                 const std::function<void(int, int, int)>& fn) {
    const int chunks = (num_paths + kChunk - 1) / kChunk;
    std::atomic<int> next{0};
    const auto worker = [&] {
        for (;;) {
            const int c = next.fetch_add(1);
            if (c >= chunks) return;
            fn(c, c * kChunk, std::min(num_paths, (c + 1) * kChunk));
        }
    };
    workers = std::clamp(workers, 1, chunks);
    if (workers == 1) {
        worker();
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

// Biased 1/M mean of per-path squared errors plus the 1/(M-1) standard error,
// per grid index; sums arrive already reduced over paths.
struct MomentAccumulator {
    std::vector<double> sum;    // sum of v_i
    std::vector<double> sum_sq; // sum of v_i^2

    explicit MomentAccumulator(size_t size) : sum(size, 0.0), sum_sq(size, 0.0) {}

    void add(const MomentAccumulator& other) {
        for (size_t i = 0; i < sum.size(); ++i) {
            sum[i] += other.sum[i];
            sum_sq[i] += other.sum_sq[i];
        }
    }

    // (max_k mean, SE at the arg max)
    std::pair<double, double> sup_metric(int num_paths) const {
        double best = 0, best_se = 0;
        for (size_t i = 0; i < sum.size(); ++i) {
            const double mean = sum[i] / num_paths;
            if (mean >= best) {
                best = mean;
                double se = 0;
                if (num_paths >= 2) {
                    const double var = std::max(
                        0.0, (sum_sq[i] - sum[i] * sum[i] / num_paths) / (num_paths - 1));
                    se = std::sqrt(var / num_paths);
                }
                best_se = se;
            }
        }
        return {best, best_se};
    }
};

struct LevelSolution {
    TimeMesh mesh;
    RiccatiSequence P;
    RiccatiSequence Pi;
    FeedbackPolicy policy;
    MeanTrajectory means;
};

LevelSolution solve_level(const ProblemData& p, const HatCoefficients& hat, int steps) {
    LevelSolution s;
    s.mesh = make_mesh(steps, p.T);
    s.P = solve_p_difference(p, s.mesh);
    s.Pi = solve_pi_difference(p, hat, s.mesh, s.P);
    s.policy = synthesize_gains(p, hat, s.P, s.Pi);
    s.means = mean_recursion(p, hat, s.policy);
    return s;
}

} // namespace

RateFit estimate_rate(std::span<const double> errors, std::span<const double> taus) {
    if (errors.size() != taus.size()) throw DegenerateData("errors and taus must pair up");
    const size_t n = errors.size();
    if (n < 2) throw DegenerateData("rate estimation needs at least two points");
    for (size_t i = 0; i < n; ++i) {
        if (!(errors[i] > 0) || !(taus[i] > 0)) {
            throw DegenerateData("rate estimation needs strictly positive errors and taus");
        }
    }

    std::vector<double> x(n), y(n);
    double mean_x = 0, mean_y = 0;
    for (size_t i = 0; i < n; ++i) {
        x[i] = std::log2(taus[i]);
        y[i] = std::log2(errors[i]);
        mean_x += x[i];
        mean_y += y[i];
    }
    mean_x /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);

    double sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mean_x) * (x[i] - mean_x);
        sxy += (x[i] - mean_x) * (y[i] - mean_y);
    }
    if (sxx == 0) throw DegenerateData("all taus coincide");

    RateFit fit;
    fit.slope = sxy / sxx;
    if (n > 2) {
        double rss = 0;
        const double intercept = mean_y - fit.slope * mean_x;
        for (size_t i = 0; i < n; ++i) {
            const double resid = y[i] - (intercept + fit.slope * x[i]);
            rss += resid * resid;
        }
        fit.halfwidth = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
    }
    return fit;
}

std::pair<RateReport, RateReport> riccati_convergence(const ProblemData& p,
                                                      std::span<const int> levels, int n_ref) {
    check_levels(levels);
    for (int lv : levels) {
        if (n_ref % lv != 0) throw MeshMismatch("every level must divide the reference grid");
    }
    const HatCoefficients hat = hat_transform(p);
    const ContinuousRiccatiReference ref = solve_continuous_reference(p, hat, n_ref);

    std::vector<LevelEntry> p_levels, pi_levels;
    for (int steps : levels) {
        const TimeMesh mesh = make_mesh(steps, p.T);
        const RiccatiSequence P = solve_p_difference(p, mesh);
        const RiccatiSequence Pi = solve_pi_difference(p, hat, mesh, P);
        p_levels.push_back({steps, mesh.tau(), riccati_error(P, ref.p), 0.0, false});
        pi_levels.push_back({steps, mesh.tau(), riccati_error(Pi, ref.pi), 0.0, false});
    }
    return {finalize("riccati_p", std::move(p_levels)), finalize("riccati_pi", std::move(pi_levels))};
}

std::pair<RateReport, RateReport> riccati_convergence(const ProblemData& p,
                                                      std::span<const int> levels,
                                                      const ExactOracle& oracle) {
    check_levels(levels);
    const HatCoefficients hat = hat_transform(p);

    std::vector<LevelEntry> p_levels, pi_levels;
    for (int steps : levels) {
        const TimeMesh mesh = make_mesh(steps, p.T);
        const RiccatiSequence P = solve_p_difference(p, mesh);
        const RiccatiSequence Pi = solve_pi_difference(p, hat, mesh, P);
        double perr = 0, pierr = 0;
        for (int k = 0; k <= steps; ++k) {
            const double t = mesh.t(k);
            perr = std::max(perr, spectral_norm(oracle.riccati_p(t) - P.at(k)));
            pierr = std::max(pierr, spectral_norm(oracle.riccati_pi(t) - Pi.at(k)));
        }
        p_levels.push_back({steps, mesh.tau(), perr, 0.0, false});
        pi_levels.push_back({steps, mesh.tau(), pierr, 0.0, false});
    }
    return {finalize("riccati_p", std::move(p_levels)), finalize("riccati_pi", std::move(pi_levels))};
}

std::pair<RateReport, RateReport> mean_convergence(const ProblemData& p, const ExactOracle& oracle,
                                                   std::span<const int> levels) {
    check_levels(levels);
    const HatCoefficients hat = hat_transform(p);

    std::vector<LevelEntry> x_levels, u_levels;
    for (int steps : levels) {
        const LevelSolution s = solve_level(p, hat, steps);
        double ex = 0, eu = 0;
        for (int k = 0; k <= steps; ++k) {
            ex = std::max(ex,
                          (oracle.mean_x(s.mesh.t(k)) - s.means.mean_x[static_cast<size_t>(k)]).norm());
        }
        for (int k = 0; k < steps; ++k) {
            eu = std::max(eu,
                          (oracle.mean_u(s.mesh.t(k)) - s.means.mean_u[static_cast<size_t>(k)]).norm());
        }
        x_levels.push_back({steps, s.mesh.tau(), ex, 0.0, false});
        u_levels.push_back({steps, s.mesh.tau(), eu, 0.0, false});
    }
    return {finalize("mean_x", std::move(x_levels)), finalize("mean_u", std::move(u_levels))};
}

std::pair<RateReport, RateReport> strong_convergence(const ProblemData& p,
                                                     const ExactOracle& oracle,
                                                     std::span<const int> levels, int num_paths,
                                                     std::uint64_t seed, HarnessOptions opts) {
    check_levels(levels);
    if (num_paths < 1) throw DomainError("need at least one path");
    const HatCoefficients hat = hat_transform(p);
    const TimeMesh fine = make_mesh(levels.back(), p.T);
    const int workers = pick_workers(opts.workers);

    std::vector<LevelEntry> x_levels, u_levels;
    for (int steps : levels) {
        const LevelSolution s = solve_level(p, hat, steps);
        const size_t np = static_cast<size_t>(steps) + 1;

        const int chunks = (num_paths + kChunk - 1) / kChunk;
        std::vector<MomentAccumulator> acc_x(static_cast<size_t>(chunks), MomentAccumulator(np));
        std::vector<MomentAccumulator> acc_u(static_cast<size_t>(chunks), MomentAccumulator(np - 1));

        run_chunked(num_paths, workers, [&](int chunk, int begin, int end) {
            MomentAccumulator& ax = acc_x[static_cast<size_t>(chunk)];
            MomentAccumulator& au = acc_u[static_cast<size_t>(chunk)];
            for (int i = begin; i < end; ++i) {
                const std::uint64_t pid = static_cast<std::uint64_t>(i);
                const std::vector<double> dw = brownian_increments(seed, pid, fine, s.mesh);
                const std::vector<double> w = brownian_points(seed, pid, fine, s.mesh);
                const PathResult path = simulate_path(p, s.policy, s.means, dw);
                for (int k = 0; k <= steps; ++k) {
                    const size_t ik = static_cast<size_t>(k);
                    const double v = (oracle.path_x(s.mesh.t(k), w[ik]) - path.x[ik]).squaredNorm();
                    ax.sum[ik] += v;
                    ax.sum_sq[ik] += v * v;
                }
                for (int k = 0; k < steps; ++k) {
                    const size_t ik = static_cast<size_t>(k);
                    const double v = (oracle.path_u(s.mesh.t(k), w[ik]) - path.u[ik]).squaredNorm();
                    au.sum[ik] += v;
                    au.sum_sq[ik] += v * v;
                }
            }
        });
        for (int c = 1; c < chunks; ++c) {
            acc_x[0].add(acc_x[static_cast<size_t>(c)]);
            acc_u[0].add(acc_u[static_cast<size_t>(c)]);
        }
        const auto [ex, ex_se] = acc_x[0].sup_metric(num_paths);
        const auto [eu, eu_se] = acc_u[0].sup_metric(num_paths);
        x_levels.push_back({steps, s.mesh.tau(), ex, ex_se, false});
        u_levels.push_back({steps, s.mesh.tau(), eu, eu_se, false});
    }
    flag_mc_limited(x_levels);
    flag_mc_limited(u_levels);
    return {finalize("strong_x", std::move(x_levels)), finalize("strong_u", std::move(u_levels))};
}

BsdeConvergence bsde_convergence(const ProblemData& p, const ExactOracle& oracle,
                                 std::span<const int> levels, int num_paths, std::uint64_t seed,
                                 HarnessOptions opts) {
    check_levels(levels);
    if (num_paths < 1) throw DomainError("need at least one path");
    const HatCoefficients hat = hat_transform(p);
    const TimeMesh fine = make_mesh(levels.back(), p.T);
    const int workers = pick_workers(opts.workers);

    // Continuous identities evaluated with the oracle closed forms.
    const auto exact_mean_y = [&](double t) -> VectorXd {
        return oracle.riccati_pi(t) * oracle.mean_x(t);
    };
    const auto exact_mean_z = [&](double t) -> VectorXd {
        return oracle.riccati_p(t) * (hat.C * oracle.mean_x(t) + hat.D * oracle.mean_u(t));
    };

    std::vector<LevelEntry> my_levels, mz_levels, sy_levels, sy_pi_levels, sz_levels;
    for (int steps : levels) {
        const LevelSolution s = solve_level(p, hat, steps);
        const AdjointMeans am = reconstruct_means(s.P, s.Pi, hat, s.means);
        const size_t ns = static_cast<size_t>(steps);

        // Path-independent pieces of the continuous identities, per grid index.
        std::vector<MatrixXd> ex_P(ns), ex_Pi(ns);
        std::vector<VectorXd> ex_mx(ns), ex_mu(ns), ex_my(ns), ex_mz(ns);
        double my_err = 0, mz_err = 0;
        for (int k = 0; k < steps; ++k) {
            const double t = s.mesh.t(k);
            const size_t ik = static_cast<size_t>(k);
            ex_P[ik] = oracle.riccati_p(t);
            ex_Pi[ik] = oracle.riccati_pi(t);
            ex_mx[ik] = oracle.mean_x(t);
            ex_mu[ik] = oracle.mean_u(t);
            ex_my[ik] = exact_mean_y(t);
            ex_mz[ik] = exact_mean_z(t);
            my_err = std::max(my_err, (ex_my[ik] - am.mean_y[ik]).norm());
            mz_err = std::max(mz_err, (ex_mz[ik] - am.mean_z[ik]).norm());
        }

        const int chunks = (num_paths + kChunk - 1) / kChunk;
        std::vector<MomentAccumulator> acc_y(static_cast<size_t>(chunks), MomentAccumulator(ns));
        std::vector<MomentAccumulator> acc_y_pi(static_cast<size_t>(chunks), MomentAccumulator(ns));
        std::vector<MomentAccumulator> acc_z(static_cast<size_t>(chunks), MomentAccumulator(ns));

        run_chunked(num_paths, workers, [&](int chunk, int begin, int end) {
            MomentAccumulator& ay = acc_y[static_cast<size_t>(chunk)];
            MomentAccumulator& ay_pi = acc_y_pi[static_cast<size_t>(chunk)];
            MomentAccumulator& az = acc_z[static_cast<size_t>(chunk)];
            for (int i = begin; i < end; ++i) {
                const std::uint64_t pid = static_cast<std::uint64_t>(i);
                const std::vector<double> dw = brownian_increments(seed, pid, fine, s.mesh);
                const std::vector<double> w = brownian_points(seed, pid, fine, s.mesh);
                const PathResult path = simulate_path(p, s.policy, s.means, dw);
                const AdjointPath ap =
                    reconstruct_path(s.P, s.Pi, p, path, s.means, am, YWeight::P);
                const AdjointPath ap_pi =
                    reconstruct_path(s.P, s.Pi, p, path, s.means, am, YWeight::Pi);
                for (int k = 0; k < steps; ++k) {
                    const double t = s.mesh.t(k);
                    const size_t ik = static_cast<size_t>(k);
                    const VectorXd fx = oracle.path_x(t, w[ik]) - ex_mx[ik];
                    const VectorXd fu = oracle.path_u(t, w[ik]) - ex_mu[ik];
                    const VectorXd y_ref = ex_P[ik] * fx + ex_my[ik];
                    const VectorXd z_ref = ex_P[ik] * (p.C * fx + p.D * fu) + ex_mz[ik];
                    const double vy = (y_ref - ap.y[ik]).squaredNorm();
                    const double vy_pi = (y_ref - ap_pi.y[ik]).squaredNorm();
                    const double vz = (z_ref - ap.z[ik]).squaredNorm();
                    ay.sum[ik] += vy;
                    ay.sum_sq[ik] += vy * vy;
                    ay_pi.sum[ik] += vy_pi;
                    ay_pi.sum_sq[ik] += vy_pi * vy_pi;
                    az.sum[ik] += vz;
                    az.sum_sq[ik] += vz * vz;
                }
            }
        });
        for (int c = 1; c < chunks; ++c) {
            acc_y[0].add(acc_y[static_cast<size_t>(c)]);
            acc_y_pi[0].add(acc_y_pi[static_cast<size_t>(c)]);
            acc_z[0].add(acc_z[static_cast<size_t>(c)]);
        }
        const auto [sy, sy_se] = acc_y[0].sup_metric(num_paths);
        const auto [sy_pi, sy_pi_se] = acc_y_pi[0].sup_metric(num_paths);
        const auto [sz, sz_se] = acc_z[0].sup_metric(num_paths);

        const double tau = s.mesh.tau();
        my_levels.push_back({steps, tau, my_err, 0.0, false});
        mz_levels.push_back({steps, tau, mz_err, 0.0, false});
        sy_levels.push_back({steps, tau, sy, sy_se, false});
        sy_pi_levels.push_back({steps, tau, sy_pi, sy_pi_se, false});
        sz_levels.push_back({steps, tau, sz, sz_se, false});
    }
    flag_mc_limited(sy_levels);
    flag_mc_limited(sy_pi_levels);
    flag_mc_limited(sz_levels);

    BsdeConvergence out;
    out.mean_y = finalize("bsde_mean_y", std::move(my_levels));
    out.mean_z = finalize("bsde_mean_z", std::move(mz_levels));
    out.second_y = finalize("bsde_second_y", std::move(sy_levels));
    out.second_y_pi = finalize("bsde_second_y_piweight", std::move(sy_pi_levels));
    out.second_z = finalize("bsde_second_z", std::move(sz_levels));
    return out;
}

} // namespace mflq
