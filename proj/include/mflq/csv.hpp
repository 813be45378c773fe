#pragma once

#include <span>
#include <string>
#include <vector>

#include "mflq/bsde.hpp"
#include "mflq/harness.hpp"
#include "mflq/policy.hpp"
#include "mflq/riccati.hpp"
#include "mflq/simulate.hpp"

// Plot-ready artifacts. All CSV uses '.' decimals, ',' separators, LF line
// endings and 17 significant digits so files are byte-stable across runs.
namespace mflq::csv {

// %.16e rendering (17 significant digits).
[[nodiscard]] std::string format17(double value);

void write_riccati(const std::string& path, const RiccatiSequence& seq,
                   const std::string& prefix);
void write_gains(const std::string& path, const FeedbackPolicy& policy);
void write_means(const std::string& path, const MeanTrajectory& means);
void write_moments(const std::string& path, const MomentSummary& summary);

// One row per (path, k); warns on stderr above 1e6 rows.
void write_paths(const std::string& path, const PathEnsemble& ensemble);

void write_adjoint_means(const std::string& path, const AdjointMeans& means);
void write_adjoint_paths(const std::string& path, std::span<const AdjointPath> paths);

void write_rates(const std::string& path, std::span<const RateReport> reports);

// JSON summary of fitted slopes, keyed by metric name. Slope is a number, or
// the string "insufficient-levels" / "degenerate" when there is nothing to fit.
[[nodiscard]] std::string rates_json(std::span<const RateReport> reports);

[[nodiscard]] std::string cost_json(const CostReport& report, int steps, int num_paths,
                                    std::uint64_t seed);

void write_text(const std::string& path, const std::string& text);

} // namespace mflq::csv
