#pragma once

// Closed-form behaviour of a B-bit table under uniform hashing, the table
// count planner, and the memory model.

#include <cstddef>
#include <cstdint>

namespace pqtable {

/// T* = 2^round(log2(B / log2 N)), rounding halves up, clamped to [1, M] and
/// reduced until it divides M. Throws invalid_argument for N < 2.
std::size_t plan_tables(std::size_t code_bits, std::uint64_t n, std::size_t subspaces);

/// p = 1 - (1 - 2^-B)^N: expected fraction of non-empty slots, which is also
/// the probability that a uniformly hashed query hits a non-empty slot.
double fill_rate(std::size_t bits, std::uint64_t n);

/// r = 1/p, expected number of hashings until the first hit. Requires N >= 1.
double expected_hashings(std::size_t bits, std::uint64_t n);

/// N / (2^B p): expected number of items in the slot of a successful hash.
/// Requires N >= 1.
double slot_occupancy(std::size_t bits, std::uint64_t n);

struct MemoryEstimate {
    double table_bytes = 0.0;        // 4N + 4DK, or (4T + B/8)N + 4DK for T > 1
    double linear_scan_bytes = 0.0;  // BN/8 + 4KD
};

MemoryEstimate estimate_memory(std::size_t bits, std::uint64_t n, std::size_t dim,
                               std::size_t centroids, std::size_t tables);

struct HashingSimulation {
    double fill_rate = 0.0;       // fraction of queries landing in a non-empty slot
    double slot_occupancy = 0.0;  // mean slot size over those hits
    std::uint64_t trials = 0;
};

/// Monte-Carlo check of the closed forms: N items and `trials` queries are
/// hashed uniformly into 2^B slots. The table is refilled every 2^B queries
/// (or once, if that exceeds `trials`). N is limited to kMaxSimulatedItems.
inline constexpr std::uint64_t kMaxSimulatedItems = std::uint64_t{1} << 25;

HashingSimulation simulate_uniform_hashing(std::size_t bits, std::uint64_t n,
                                           std::uint64_t trials, std::uint64_t seed);

}  // namespace pqtable
