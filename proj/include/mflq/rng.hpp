#pragma once

#include <cstdint>
#include <vector>

#include "mflq/core.hpp"

namespace mflq {

// Counter-based random numbers: every draw is a pure function of
// (seed, path_id, step), so any parallel schedule reproduces the same
// ensemble bit for bit.

// Philox-2x64, 10 rounds. Key = seed, counter = (path_id, index).
[[nodiscard]] std::uint64_t philox2x64(std::uint64_t key, std::uint64_t ctr0, std::uint64_t ctr1);

// Uniform in (0, 1), exactly representable, never 0 or 1 (top 53 bits).
[[nodiscard]] double uniform_from_bits(std::uint64_t bits);

// Standard normal draw for fine step `step` of path `path_id`:
// inverse-CDF applied to the counter-based uniform.
[[nodiscard]] double standard_normal(std::uint64_t seed, std::uint64_t path_id, std::uint64_t step);

// N(0, tau_fine) increments on the fine mesh, one per step.
[[nodiscard]] std::vector<double> fine_increments(std::uint64_t seed, std::uint64_t path_id,
                                                  const TimeMesh& fine);

// Block sums of the fine increments on the (nested) level mesh, summed left
// to right within each block. level == fine returns the fine increments.
[[nodiscard]] std::vector<double> brownian_increments(std::uint64_t seed, std::uint64_t path_id,
                                                      const TimeMesh& fine, const TimeMesh& level);

// W at the level grid points (N_level + 1 values, W(0) = 0), computed as the
// running left-to-right prefix sum of the fine increments.
[[nodiscard]] std::vector<double> brownian_points(std::uint64_t seed, std::uint64_t path_id,
                                                  const TimeMesh& fine, const TimeMesh& level);

} // namespace mflq
