#include <gtest/gtest.h>

#include <cmath>

#include "pqtable/analysis.hpp"
#include "pqtable/common.hpp"

using namespace pqtable;

namespace {

// Independent oracle: direct power in long double.
long double fill_rate_oracle(int bits, long double n) {
    return 1.0L - std::pow(1.0L - std::ldexp(1.0L, -bits), n);
}

}  // namespace

TEST(PlanTables, PublishedTableCounts) {
    const std::uint64_t sizes[] = {100ULL, 1000ULL, 10000ULL, 100000ULL,
                                   1000000ULL, 10000000ULL, 100000000ULL, 1000000000ULL};
    const std::size_t b32[] = {4, 4, 2, 2, 2, 1, 1, 1};
    const std::size_t b64[] = {8, 8, 4, 4, 4, 2, 2, 2};
    for (int i = 0; i < 8; ++i) {
        EXPECT_EQ(plan_tables(32, sizes[i], 4), b32[i]) << "N " << sizes[i];
        EXPECT_EQ(plan_tables(64, sizes[i], 8), b64[i]) << "N " << sizes[i];
    }
}

TEST(PlanTables, ClampsAndDivides) {
    // B / log2 N = 32 / 1 = 32 tables wanted, only M = 4 available.
    EXPECT_EQ(plan_tables(32, 2, 4), 4u);
    // 4 wanted but M = 6: the largest power of two dividing it is 2.
    EXPECT_EQ(plan_tables(32, 256, 6), 2u);
    EXPECT_EQ(plan_tables(8, 1ULL << 40, 1), 1u);
}

TEST(PlanTables, SmallNRejected) {
    for (std::uint64_t n : {0ULL, 1ULL}) {
        try {
            plan_tables(32, n, 4);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::invalid_argument);
        }
    }
}

TEST(FillRate, MatchesPowerOracle) {
    for (int bits : {8, 12, 16, 32, 64}) {
        for (long double n : {1.0L, 10.0L, 1000.0L, 1e6L, 1e9L}) {
            const long double want = fill_rate_oracle(bits, n);
            const double got = fill_rate(bits, static_cast<std::uint64_t>(n));
            EXPECT_NEAR(got, static_cast<double>(want), 1e-12 + 1e-9 * static_cast<double>(want))
                    << "B " << bits << " N " << static_cast<double>(n);
        }
    }
}

TEST(FillRate, BillionItemsInThirtyTwoBits) {
    EXPECT_NEAR(fill_rate(32, 1000000000ULL), 0.21, 0.005);
}

TEST(FillRate, EdgeCases) {
    EXPECT_EQ(fill_rate(32, 0), 0.0);
    EXPECT_EQ(fill_rate(0, 5), 1.0);
    EXPECT_NEAR(fill_rate(1, 1), 0.5, 1e-15);
}

TEST(Hashing, ExpectedHashingsAndOccupancy) {
    const double p = fill_rate(12, 4096);
    EXPECT_DOUBLE_EQ(expected_hashings(12, 4096), 1.0 / p);
    EXPECT_DOUBLE_EQ(slot_occupancy(12, 4096), 4096.0 / (4096.0 * p));
    EXPECT_THROW(expected_hashings(12, 0), Error);
    EXPECT_THROW(slot_occupancy(12, 0), Error);
}

TEST(Memory, SingleTableFormula) {
    for (std::uint64_t n : {1000ULL, 1000000ULL}) {
        const auto est = estimate_memory(32, n, 128, 256, 1);
        EXPECT_DOUBLE_EQ(est.table_bytes, 4.0 * static_cast<double>(n) + 4.0 * 128 * 256);
        EXPECT_DOUBLE_EQ(est.linear_scan_bytes, 4.0 * static_cast<double>(n) + 4.0 * 128 * 256);
    }
}

TEST(Memory, MultiTableFormula) {
    const auto est = estimate_memory(64, 1000000000ULL, 128, 256, 2);
    // (4 * 2 + 8) * 1e9 bytes plus the codebook: 16 GB.
    EXPECT_DOUBLE_EQ(est.table_bytes, 16e9 + 4.0 * 128 * 256);
    EXPECT_NEAR(est.table_bytes / 1e9, 16.0, 0.01);
    EXPECT_DOUBLE_EQ(est.linear_scan_bytes, 8e9 + 4.0 * 128 * 256);
    EXPECT_THROW(estimate_memory(64, 10, 128, 256, 0), Error);
}

TEST(Simulation, AgreesWithClosedForms) {
    for (std::uint64_t n : {1ULL << 10, 1ULL << 12, 1ULL << 14}) {
        const auto sim = simulate_uniform_hashing(12, n, 1000000, 42 + n);
        EXPECT_EQ(sim.trials, 1000000u);
        const double p = fill_rate(12, n);
        EXPECT_LT(std::abs(sim.fill_rate - p) / p, 0.01) << "N " << n;
        const double occ = slot_occupancy(12, n);
        EXPECT_LT(std::abs(sim.slot_occupancy - occ) / occ, 0.02) << "N " << n;
    }
}

TEST(Simulation, SparseSlotsPath) {
    // 32-bit keys exercise the hash-map branch.
    const auto sim = simulate_uniform_hashing(32, 100000, 200000, 3);
    const double p = fill_rate(32, 100000);
    EXPECT_NEAR(sim.fill_rate, p, 5.0 * std::sqrt(p / 200000.0) + 1e-6);
}

TEST(Simulation, Deterministic) {
    const auto a = simulate_uniform_hashing(10, 500, 10000, 9);
    const auto b = simulate_uniform_hashing(10, 500, 10000, 9);
    EXPECT_EQ(a.fill_rate, b.fill_rate);
    EXPECT_EQ(a.slot_occupancy, b.slot_occupancy);
    EXPECT_THROW(simulate_uniform_hashing(10, 500, 0, 9), Error);
}

TEST(Simulation, RefusesHugeTables) {
    try {
        simulate_uniform_hashing(32, 1000000000ULL, 10, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_argument);
    }
}
