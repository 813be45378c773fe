#include "mflq/rng.hpp"

#include <cmath>

#include <boost/math/special_functions/erf.hpp>

namespace mflq {

namespace {

constexpr std::uint64_t kPhiloxMul = 0xD2B74407B1CE6E93ULL;
constexpr std::uint64_t kPhiloxWeyl = 0x9E3779B97F4A7C15ULL;

void require_nested(const TimeMesh& coarse, const TimeMesh& fine) {
    if (!is_nested(coarse, fine)) {
        throw MeshMismatch("level mesh must divide the fine mesh");
    }
}

} // namespace

std::uint64_t philox2x64(std::uint64_t key, std::uint64_t ctr0, std::uint64_t ctr1) {
    for (int round = 0; round < 10; ++round) {
        const unsigned __int128 product = static_cast<unsigned __int128>(kPhiloxMul) * ctr0;
        const std::uint64_t hi = static_cast<std::uint64_t>(product >> 64);
        const std::uint64_t lo = static_cast<std::uint64_t>(product);
        ctr0 = hi ^ key ^ ctr1;
        ctr1 = lo;
        key += kPhiloxWeyl;
    }
    return ctr0;
}

double uniform_from_bits(std::uint64_t bits) {
    // (bits >> 12) + 0.5 is exact (spacing in [2^51, 2^52) is 0.5), so the
    // result lands in [2^-53, 1 - 2^-53] with no rounding anywhere.
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

double standard_normal(std::uint64_t seed, std::uint64_t path_id, std::uint64_t step) {
    const double u = uniform_from_bits(philox2x64(seed, path_id, step));
    // Phi^{-1}(u) = -sqrt(2) * erfc^{-1}(2u)
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

std::vector<double> fine_increments(std::uint64_t seed, std::uint64_t path_id,
                                    const TimeMesh& fine) {
    const double scale = std::sqrt(fine.tau());
    std::vector<double> dw(static_cast<size_t>(fine.steps));
    for (int j = 0; j < fine.steps; ++j) {
        dw[static_cast<size_t>(j)] =
            scale * standard_normal(seed, path_id, static_cast<std::uint64_t>(j));
    }
    return dw;
}

std::vector<double> brownian_increments(std::uint64_t seed, std::uint64_t path_id,
                                        const TimeMesh& fine, const TimeMesh& level) {
    require_nested(level, fine);
    const std::vector<double> dw = fine_increments(seed, path_id, fine);
    const int block = fine.steps / level.steps;
    std::vector<double> out(static_cast<size_t>(level.steps));
    for (int k = 0; k < level.steps; ++k) {
        double sum = 0.0;
        for (int j = 0; j < block; ++j) {
            sum += dw[static_cast<size_t>(k * block + j)];
        }
        out[static_cast<size_t>(k)] = sum;
    }
    return out;
}

std::vector<double> brownian_points(std::uint64_t seed, std::uint64_t path_id,
                                    const TimeMesh& fine, const TimeMesh& level) {
    require_nested(level, fine);
    const std::vector<double> dw = fine_increments(seed, path_id, fine);
    const int block = fine.steps / level.steps;
    std::vector<double> w(static_cast<size_t>(level.steps) + 1, 0.0);
    double running = 0.0;
    for (int j = 0; j < fine.steps; ++j) {
        running += dw[static_cast<size_t>(j)];
        if ((j + 1) % block == 0) {
            w[static_cast<size_t>((j + 1) / block)] = running;
        }
    }
    return w;
}

} // namespace mflq
