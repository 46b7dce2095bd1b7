#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "pqtable/analysis.hpp"
#include "pqtable/dataset_io.hpp"
#include "pqtable/table.hpp"

using namespace pqtable;

namespace {

std::vector<double> distances(const std::vector<Score>& s) {
    std::vector<double> d;
    for (const auto& x : s) {
        d.push_back(x.dist);
    }
    return d;
}

struct Fixture {
    std::shared_ptr<const Codebook> cb;
    FloatMatrix base;
    FloatMatrix queries;
    CodeArray codes;
};

Fixture make_fixture(std::size_t n, std::size_t dim, std::size_t m, std::size_t k, std::uint64_t seed) {
    SynthParams mix;
    mix.distribution = Distribution::clustered;
    FloatMatrix all = synthesize(n + 50, dim, seed, mix);
    FloatMatrix base(n, dim, std::vector<float>(all.data(), all.data() + n * dim));
    FloatMatrix queries(50, dim, std::vector<float>(all.data() + n * dim, all.data() + (n + 50) * dim));
    auto cb = std::make_shared<const Codebook>(
            train_codebook(base.view().prefix(std::min<std::size_t>(n, 5000)), {m, k, 8, seed}));
    CodeArray codes = encode_all(base, *cb);
    return {cb, std::move(base), std::move(queries), std::move(codes)};
}

}  // namespace

TEST(SinglePQTable, IdenticalCodesShareSlot) {
    auto cb = std::make_shared<const Codebook>(Codebook(4, 4, 256, std::vector<float>(4 * 256)));
    SinglePQTable table(cb);
    std::vector<PQCode> codes{{0, 0, 0, 1}, {0, 0, 0, 1}};
    table.insert(codes);
    const auto ids = table.store().lookup(PQCode{0, 0, 0, 1});
    EXPECT_EQ(std::vector<RecordId>(ids.begin(), ids.end()), (std::vector<RecordId>{0, 1}));
}

TEST(SinglePQTable, SlotsMatchReferenceMultimap) {
    auto cb = std::make_shared<const Codebook>(Codebook(4, 2, 16, std::vector<float>(4 * 16)));
    SinglePQTable table(cb);
    std::mt19937_64 rng(1);
    std::vector<PQCode> codes;
    std::map<PQCode, std::vector<RecordId>> ref;
    for (std::size_t i = 0; i < 10000; ++i) {
        codes.push_back({static_cast<CodeElement>(rng() % 16), static_cast<CodeElement>(rng() % 16)});
        ref[codes.back()].push_back(static_cast<RecordId>(i));
    }
    table.insert(codes);
    std::size_t total = 0;
    for (const auto& [key, ids] : ref) {
        const auto got = table.store().lookup(key);
        EXPECT_EQ(std::vector<RecordId>(got.begin(), got.end()), ids);
        total += got.size();
    }
    EXPECT_EQ(total, 10000u);
    EXPECT_EQ(table.size(), 10000u);
}

TEST(SinglePQTable, MatchesLinearScan) {
    const Fixture f = make_fixture(10000, 16, 4, 16, 3);
    SinglePQTable table(f.cb);
    table.insert(f.codes);
    for (std::size_t q = 0; q < f.queries.rows(); ++q) {
        for (std::size_t l : {1u, 10u, 100u}) {
            const auto got = table.query(f.queries.row(q), l);
            const auto want = linear_adc_scan(f.queries.row(q), f.codes, *f.cb, l);
            EXPECT_EQ(distances(got), distances(want)) << "query " << q << " L " << l;
        }
    }
}

TEST(SinglePQTable, LEqualsNReturnsEverything) {
    const Fixture f = make_fixture(300, 8, 2, 8, 4);
    SinglePQTable table(f.cb);
    table.insert(f.codes);
    const auto got = table.query(f.queries.row(0), 300);
    EXPECT_EQ(got, linear_adc_scan(f.queries.row(0), f.codes, *f.cb, 300));
}

TEST(SinglePQTable, FirstHitStats) {
    const Fixture f = make_fixture(2000, 8, 2, 16, 5);
    SinglePQTable table(f.cb);
    table.insert(f.codes);
    // A query equal to a stored reconstruction hits on the first hashing.
    const auto q = decode(f.codes.code(17), *f.cb);
    QueryStats stats;
    const auto got = table.query(q, 1, &stats);
    EXPECT_EQ(stats.first_hit, 1u);
    EXPECT_EQ(stats.hashings, 1u);
    EXPECT_EQ(got[0].dist, 0.0);
}

TEST(SinglePQTable, Errors) {
    auto cb = std::make_shared<const Codebook>(Codebook(2, 2, 2, {0.0f, 1.0f, 0.0f, 1.0f}));
    SinglePQTable table(cb);
    const std::vector<float> q{0.0f, 0.0f};
    try {
        table.query(q, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::empty_database);
    }
    table.insert(std::vector<PQCode>{{0, 1}});
    try {
        table.query(q, 2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::exhausted);
    }
    EXPECT_THROW(table.query(q, 0), Error);
}

TEST(MultiPQTable, SplitsCodeAcrossTables) {
    auto cb = std::make_shared<const Codebook>(Codebook(4, 4, 256, std::vector<float>(4 * 256)));
    MultiPQTable table(cb, 2);
    std::vector<PQCode> codes(94, PQCode{0, 0, 0, 0});
    codes[93] = {13, 35, 7, 9};
    table.insert(codes);
    const auto first = table.store(0).lookup(PQCode{13, 35});
    const auto second = table.store(1).lookup(PQCode{7, 9});
    ASSERT_EQ(first.size(), 1u);
    ASSERT_EQ(second.size(), 1u);
    EXPECT_EQ(first[0], 93u);
    EXPECT_EQ(second[0], 93u);
    EXPECT_EQ(table.codes().code(93), (PQCode{13, 35, 7, 9}));
}

TEST(MultiPQTable, RejectsIndivisibleTableCount) {
    auto cb = std::make_shared<const Codebook>(Codebook(6, 6, 4, std::vector<float>(6 * 4)));
    try {
        MultiPQTable(cb, 4);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_argument);
    }
}

TEST(MultiPQTable, StoresMatchReferenceMultimaps) {
    auto cb = std::make_shared<const Codebook>(Codebook(8, 4, 16, std::vector<float>(8 * 16)));
    MultiPQTable table(cb, 2);
    std::mt19937_64 rng(6);
    std::vector<PQCode> codes;
    std::map<PQCode, std::vector<RecordId>> ref[2];
    for (std::size_t i = 0; i < 10000; ++i) {
        PQCode c(4);
        for (auto& e : c) {
            e = static_cast<CodeElement>(rng() % 16);
        }
        codes.push_back(c);
        ref[0][PQCode(c.begin(), c.begin() + 2)].push_back(static_cast<RecordId>(i));
        ref[1][PQCode(c.begin() + 2, c.end())].push_back(static_cast<RecordId>(i));
    }
    table.insert(codes);
    for (std::size_t t = 0; t < 2; ++t) {
        EXPECT_EQ(table.store(t).slot_count(), ref[t].size());
        EXPECT_LE(table.store(t).slot_count(), std::size_t{1} << table.store(t).key_bits());
        for (const auto& [key, ids] : ref[t]) {
            const auto got = table.store(t).lookup(key);
            EXPECT_EQ(std::vector<RecordId>(got.begin(), got.end()), ids);
        }
    }
}

TEST(MultiPQTable, OneTableEqualsSingle) {
    const Fixture f = make_fixture(5000, 16, 4, 16, 7);
    SinglePQTable single(f.cb);
    single.insert(f.codes);
    MultiPQTable multi(f.cb, 1);
    multi.insert(f.codes);
    for (std::size_t q = 0; q < 20; ++q) {
        for (std::size_t l : {1u, 10u, 100u}) {
            EXPECT_EQ(multi.query(f.queries.row(q), l), single.query(f.queries.row(q), l));
        }
    }
}

TEST(MultiPQTable, MatchesLinearScan) {
    const Fixture f = make_fixture(10000, 32, 8, 16, 8);
    for (std::size_t t : {2u, 4u}) {
        MultiPQTable table(f.cb, t);
        table.insert(f.codes);
        for (std::size_t q = 0; q < f.queries.rows(); ++q) {
            for (std::size_t l : {1u, 10u, 100u}) {
                const auto got = table.query(f.queries.row(q), l);
                const auto want = linear_adc_scan(f.queries.row(q), f.codes, *f.cb, l);
                EXPECT_EQ(distances(got), distances(want)) << "T " << t << " query " << q << " L " << l;
            }
        }
    }
}

TEST(MultiPQTable, EveryCloserItemIsMarkedAtTheBound) {
    const Fixture f = make_fixture(3000, 16, 4, 16, 9);
    MultiPQTable table(f.cb, 2);
    table.insert(f.codes);
    std::size_t events = 0;
    for (std::size_t q = 0; q < f.queries.rows(); ++q) {
        const DistanceMatrix dm = build_distance_matrix(f.queries.row(q), *f.cb);
        BoundObserver check = [&](const BoundEvent& ev) {
            ++events;
            std::vector<bool> marked(f.codes.size(), false);
            for (const Score& s : ev.marked) {
                marked[s.id] = true;
            }
            EXPECT_TRUE(marked[ev.bound_id]);
            for (std::size_t n = 0; n < f.codes.size(); ++n) {
                if (adc_distance(dm, f.codes, n) < ev.d_min) {
                    EXPECT_TRUE(marked[n]) << "id " << n << " below d_min but unmarked";
                }
            }
        };
        table.query(f.queries.row(q), 10, nullptr, &check);
    }
    EXPECT_GT(events, 0u);
}

TEST(MultiPQTable, WorkedMergeTrace) {
    // Two one-dimensional subspaces, T = 2, query at the origin. Squared
    // sub-distances: table 1 {0, 0.1, 4, 9}, table 2 {0.05, 0.25, 0.3, 9}.
    const std::vector<float> words{0.0f, std::sqrt(0.1f), 2.0f, 3.0f,
                                   std::sqrt(0.05f), 0.5f, std::sqrt(0.3f), 3.0f};
    auto cb = std::make_shared<const Codebook>(Codebook(2, 2, 4, words));
    std::vector<PQCode> codes(600, PQCode{2, 3});  // filler, far away
    codes[585] = {0, 2};  // 0 + 0.3
    codes[2] = {0, 3};    // 0 + 9
    codes[24] = {3, 0};   // 9 + 0.05
    codes[456] = {1, 1};  // 0.1 + 0.25
    MultiPQTable table(cb, 2);
    table.insert(codes);

    std::vector<BoundEvent> events;
    std::vector<Score> marked_copy;
    BoundObserver obs = [&](const BoundEvent& ev) {
        events.push_back(ev);
        marked_copy.assign(ev.marked.begin(), ev.marked.end());
    };
    const std::vector<float> q{0.0f, 0.0f};
    const auto got = table.query(q, 2, nullptr, &obs);

    ASSERT_EQ(events.size(), 1u);
    EXPECT_EQ(events[0].bound_id, 456u);
    EXPECT_NEAR(events[0].d_min, 0.35, 1e-6);
    std::vector<RecordId> marked_ids;
    for (const auto& s : marked_copy) {
        marked_ids.push_back(s.id);
    }
    std::sort(marked_ids.begin(), marked_ids.end());
    EXPECT_EQ(marked_ids, (std::vector<RecordId>{2, 24, 456, 585}));
    ASSERT_EQ(got.size(), 2u);
    EXPECT_EQ(got[0].id, 585u);
    EXPECT_EQ(got[1].id, 456u);
    EXPECT_EQ(distances(got), distances(linear_adc_scan(q, table.codes(), *cb, 2)));
}

TEST(MultiPQTable, ExhaustedGeneratorsFinalizeFromMarked) {
    // L = N forces every generator to run to the end.
    const Fixture f = make_fixture(200, 8, 4, 4, 10);
    MultiPQTable table(f.cb, 2);
    table.insert(f.codes);
    const auto got = table.query(f.queries.row(0), 200);
    EXPECT_EQ(distances(got), distances(linear_adc_scan(f.queries.row(0), f.codes, *f.cb, 200)));
}

TEST(MultiPQTable, LargerThanNIsExhausted) {
    const Fixture f = make_fixture(100, 8, 4, 4, 11);
    MultiPQTable table(f.cb, 2);
    table.insert(f.codes);
    try {
        table.query(f.queries.row(0), 101);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::exhausted);
    }
}

TEST(SinglePQTable, ClusteredDataBeatsUniformHitRate) {
    // Queries drawn from the data distribution find a non-empty slot far
    // sooner than uniform hashing into 2^B slots would.
    const Fixture f = make_fixture(10000, 32, 4, 256, 12);
    SinglePQTable table(f.cb);
    table.insert(f.codes);
    double hashings = 0.0;
    for (std::size_t q = 0; q < f.queries.rows(); ++q) {
        QueryStats stats;
        table.query(f.queries.row(q), 1, &stats);
        hashings += static_cast<double>(stats.first_hit);
    }
    const double measured = static_cast<double>(f.queries.rows()) / hashings;
    EXPECT_GT(measured, fill_rate(32, 10000));
}
