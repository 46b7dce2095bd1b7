#include "pqtable/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>
#include <vector>

#include "pqtable/common.hpp"

namespace pqtable {

std::size_t plan_tables(std::size_t code_bits, std::uint64_t n, std::size_t subspaces) {
    PQTABLE_CHECK(n >= 2, invalid_argument, "planner needs N >= 2 (log2 N must be positive)");
    PQTABLE_CHECK(code_bits >= 1 && subspaces >= 1, invalid_argument, "B and M must be positive");
    const double ratio = static_cast<double>(code_bits) / std::log2(static_cast<double>(n));
    const double exponent = std::floor(std::log2(ratio) + 0.5);
    std::size_t tables = 1;
    if (exponent > 0) {
        const double t = std::ldexp(1.0, static_cast<int>(std::min(exponent, 62.0)));
        tables = t >= static_cast<double>(subspaces) ? subspaces : static_cast<std::size_t>(t);
    }
    while (tables > 1 && subspaces % tables != 0) {
        tables /= 2;
    }
    return tables;
}

double fill_rate(std::size_t bits, std::uint64_t n) {
    if (n == 0) {
        return 0.0;
    }
    const double inv_slots = std::ldexp(1.0, -static_cast<int>(bits));
    if (inv_slots >= 1.0) {
        return 1.0;
    }
    return -std::expm1(static_cast<double>(n) * std::log1p(-inv_slots));
}

double expected_hashings(std::size_t bits, std::uint64_t n) {
    PQTABLE_CHECK(n >= 1, invalid_argument, "expected hashings undefined for an empty table");
    return 1.0 / fill_rate(bits, n);
}

double slot_occupancy(std::size_t bits, std::uint64_t n) {
    PQTABLE_CHECK(n >= 1, invalid_argument, "slot occupancy undefined for an empty table");
    const double filled = std::ldexp(fill_rate(bits, n), static_cast<int>(bits));
    return static_cast<double>(n) / filled;
}

MemoryEstimate estimate_memory(std::size_t bits, std::uint64_t n, std::size_t dim,
                               std::size_t centroids, std::size_t tables) {
    PQTABLE_CHECK(tables >= 1, invalid_argument, "table count must be positive");
    const double nn = static_cast<double>(n);
    const double codebook = 4.0 * static_cast<double>(dim) * static_cast<double>(centroids);
    const double code_bytes = static_cast<double>(bits) / 8.0;
    MemoryEstimate est;
    est.table_bytes = tables == 1 ? 4.0 * nn + codebook
                                  : (4.0 * static_cast<double>(tables) + code_bytes) * nn + codebook;
    est.linear_scan_bytes = code_bytes * nn + codebook;
    return est;
}

HashingSimulation simulate_uniform_hashing(std::size_t bits, std::uint64_t n,
                                           std::uint64_t trials, std::uint64_t seed) {
    PQTABLE_CHECK(bits <= 63, invalid_argument, "simulation supports at most 63-bit keys");
    PQTABLE_CHECK(trials >= 1, invalid_argument, "at least one trial");
    PQTABLE_CHECK(n <= kMaxSimulatedItems, invalid_argument, "too many items to simulate (limit 2^25)");
    std::mt19937_64 rng(seed);
    const auto draw = [&rng, bits]() -> std::uint64_t { return bits == 0 ? 0 : rng() >> (64 - bits); };

    const std::uint64_t slots = std::uint64_t{1} << bits;
    const std::uint64_t per_fill = std::min<std::uint64_t>(slots, trials);
    const bool dense = bits <= 24;

    std::vector<std::uint32_t> counts(dense ? slots : 0);
    std::unordered_map<std::uint64_t, std::uint32_t> sparse;

    std::uint64_t hits = 0;
    double occupancy_sum = 0.0;
    std::uint64_t done = 0;
    while (done < trials) {
        if (dense) {
            std::fill(counts.begin(), counts.end(), 0u);
        } else {
            sparse.clear();
            sparse.reserve(static_cast<std::size_t>(n));
        }
        for (std::uint64_t i = 0; i < n; ++i) {
            if (dense) {
                ++counts[draw()];
            } else {
                ++sparse[draw()];
            }
        }
        const std::uint64_t batch = std::min(per_fill, trials - done);
        for (std::uint64_t i = 0; i < batch; ++i) {
            std::uint32_t c = 0;
            if (dense) {
                c = counts[draw()];
            } else if (const auto it = sparse.find(draw()); it != sparse.end()) {
                c = it->second;
            }
            if (c > 0) {
                ++hits;
                occupancy_sum += c;
            }
        }
        done += batch;
    }

    HashingSimulation sim;
    sim.trials = trials;
    sim.fill_rate = static_cast<double>(hits) / static_cast<double>(trials);
    sim.slot_occupancy = hits == 0 ? 0.0 : occupancy_sum / static_cast<double>(hits);
    return sim;
}

}  // namespace pqtable
