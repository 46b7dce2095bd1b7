// pqtable: train, build, query, bench and analyze from the command line.
// Results go to stdout as one JSON object per line; diagnostics to stderr.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pqtable/pqtable.h"

namespace {

using json = nlohmann::json;

// Maps a library status to a process exit code: 1 for internal failures,
// 2 for bad input (usage, files, formats, shapes).
struct Failure {
    int exit_code;
    std::string message;
};

void check(pqt_status s, const std::string& what) {
    if (s == PQT_OK) {
        return;
    }
    throw Failure{s == PQT_ERR_INTERNAL ? 1 : 2,
                  what + ": " + pqt_status_name(s) + ": " + pqt_last_error()};
}

template <class T, void (*Free)(T*)>
struct Deleter {
    void operator()(T* p) const { Free(p); }
};

using MatrixPtr = std::unique_ptr<pqt_matrix, Deleter<pqt_matrix, pqt_matrix_free>>;
using GroundTruthPtr = std::unique_ptr<pqt_groundtruth, Deleter<pqt_groundtruth, pqt_groundtruth_free>>;
using QuantizerPtr = std::unique_ptr<pqt_quantizer, Deleter<pqt_quantizer, pqt_quantizer_free>>;
using IndexPtr = std::unique_ptr<pqt_index, Deleter<pqt_index, pqt_index_free>>;

void emit(const json& record) { std::cout << record.dump() << '\n' << std::flush; }

struct DataFlags {
    std::string path;
    std::string kind = "fvecs";
    std::size_t limit = 0;
    std::string synthetic;  // gaussian | clustered
    std::size_t n = 10000;
    std::size_t dim = 32;
    std::uint64_t seed = 1234;
    pqt_synth_params mixture = pqt_synth_defaults();

    void add(CLI::App* app) {
        auto* data = app->add_option("--data", path, "Base/training vectors file");
        app->add_option("--kind", kind, "File kind")->check(CLI::IsMember({"fvecs", "bvecs"}));
        app->add_option("--limit", limit, "Read at most this many vectors (0 = all)");
        auto* synth = app->add_option("--synthetic", synthetic, "Generate data instead of reading a file")
                              ->check(CLI::IsMember({"gaussian", "clustered"}));
        app->add_option("--n", n, "Synthetic vector count");
        app->add_option("--dim", dim, "Synthetic dimension");
        app->add_option("--clusters", mixture.clusters, "Clustered mode: mixture components");
        app->add_option("--center-spread", mixture.center_spread, "Clustered mode: stddev of the centres");
        app->add_option("--cluster-spread", mixture.cluster_spread, "Clustered mode: stddev inside a cluster");
        data->excludes(synth);
    }

    MatrixPtr load(std::size_t extra = 0) const {
        pqt_matrix* m = nullptr;
        if (!synthetic.empty()) {
            pqt_synth_params p = mixture;
            p.distribution = synthetic == "clustered" ? PQT_CLUSTERED : PQT_GAUSSIAN;
            check(pqt_matrix_synthesize(n + extra, dim, seed, &p, &m), "synthesize");
        } else if (path.empty()) {
            throw Failure{2, "one of --data or --synthetic is required"};
        } else {
            check(pqt_matrix_read(path.c_str(), kind.c_str(), limit, &m), "read " + path);
        }
        return MatrixPtr(m);
    }

    std::string source() const { return synthetic.empty() ? path : "synthetic:" + synthetic; }
};

MatrixPtr slice(const pqt_matrix* m, std::size_t first, std::size_t count) {
    const std::size_t cols = pqt_matrix_cols(m);
    pqt_matrix* out = nullptr;
    check(pqt_matrix_create(pqt_matrix_data(m) + first * cols, count, cols, &out), "slice");
    return MatrixPtr(out);
}

struct LatencyStats {
    double mean = 0, p50 = 0, p95 = 0, p99 = 0;
};

LatencyStats summarize(std::vector<double> ms) {
    LatencyStats s;
    if (ms.empty()) {
        return s;
    }
    double total = 0;
    for (double v : ms) {
        total += v;
    }
    s.mean = total / static_cast<double>(ms.size());
    std::sort(ms.begin(), ms.end());
    const auto pct = [&ms](double p) {
        const auto i = static_cast<std::size_t>(std::ceil(p * static_cast<double>(ms.size()))) - 1;
        return ms[std::min(i, ms.size() - 1)];
    };
    s.p50 = pct(0.50);
    s.p95 = pct(0.95);
    s.p99 = pct(0.99);
    return s;
}

struct RunResult {
    LatencyStats latency;
    double mean_hashings = 0;
    std::vector<pqt_result> results;  // queries x topk
};

RunResult run_queries(const pqt_index* index, const pqt_matrix* queries, std::size_t topk,
                      pqt_search_mode mode) {
    const std::size_t nq = pqt_matrix_rows(queries);
    const std::size_t dim = pqt_matrix_cols(queries);
    RunResult run;
    run.results.resize(nq * topk);
    std::vector<double> ms;
    ms.reserve(nq);
    double hashings = 0;
    for (std::size_t q = 0; q < nq; ++q) {
        pqt_query_stats stats{};
        std::size_t count = 0;
        const auto start = std::chrono::steady_clock::now();
        const pqt_status s = pqt_index_search(index, pqt_matrix_data(queries) + q * dim, dim, topk, mode,
                                              run.results.data() + q * topk, &count, &stats);
        const auto stop = std::chrono::steady_clock::now();
        check(s, "query");
        ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
        hashings += static_cast<double>(stats.hashings);
    }
    run.latency = summarize(std::move(ms));
    run.mean_hashings = nq == 0 ? 0 : hashings / static_cast<double>(nq);
    return run;
}

json latency_json(const LatencyStats& s) {
    return {{"mean_ms", s.mean}, {"p50_ms", s.p50}, {"p95_ms", s.p95}, {"p99_ms", s.p99}};
}

json recall_json(const RunResult& run, std::size_t nq, std::size_t topk, const pqt_groundtruth* gt) {
    json out = json::object();
    for (std::size_t r : {1, 10, 100}) {
        if (r > topk) {
            continue;
        }
        double recall = 0;
        check(pqt_recall_at(run.results.data(), nq, topk, gt, r, &recall), "recall");
        out["recall@" + std::to_string(r)] = recall;
    }
    return out;
}

template <class Fn>
std::optional<double> absent_on_error(Fn&& fn) {
    double v = 0;
    if (fn(&v) != PQT_OK) {
        return std::nullopt;
    }
    return v;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// ---------------------------------------------------------------------------

struct TrainCmd {
    DataFlags data;
    std::size_t m = 8, k = 256, iters = 25, opq_iters = 10;
    bool opq = false;
    std::string out;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("train", "Train a product quantizer (optionally OPQ)");
        data.add(sub);
        sub->add_option("--m", m, "Subspaces M");
        sub->add_option("--k", k, "Centroids per subspace K");
        sub->add_option("--iters", iters, "k-means iterations");
        sub->add_option("--seed", data.seed, "Random seed");
        sub->add_flag("--opq", opq, "Learn a rotation as well");
        sub->add_option("--opq-iters", opq_iters, "OPQ alternations");
        sub->add_option("--out", out, "Codebook output file")->required();
        sub->final_callback([this] { run(); });
    }

    void run() {
        auto train = data.load();
        pqt_train_params p = pqt_train_defaults();
        p.subspaces = m;
        p.centroids = k;
        p.iterations = iters;
        p.seed = data.seed;
        p.opq = opq ? 1 : 0;
        p.opq_iterations = opq_iters;
        pqt_quantizer* raw = nullptr;
        check(pqt_quantizer_train(train.get(), &p, &raw), "train");
        QuantizerPtr q(raw);
        double error = 0;
        check(pqt_quantizer_error(q.get(), train.get(), &error), "quantization error");
        check(pqt_quantizer_save(q.get(), out.c_str()), "write " + out);
        emit({{"command", "train"},
              {"data", data.source()},
              {"N", pqt_matrix_rows(train.get())},
              {"D", pqt_matrix_cols(train.get())},
              {"M", m},
              {"K", k},
              {"B", pqt_quantizer_code_bits(q.get())},
              {"iters", iters},
              {"seed", data.seed},
              {"opq", opq},
              {"quantization_error", error},
              {"out", out}});
    }
};

struct BuildCmd {
    DataFlags data;
    std::string codebook, out;
    std::size_t tables = 0;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("build", "Encode base vectors and write an index");
        data.add(sub);
        sub->add_option("--seed", data.seed, "Seed for --synthetic");
        sub->add_option("--codebook", codebook, "Codebook file from 'train'")->required();
        sub->add_option("--tables", tables, "Table count T (0 = automatic)");
        sub->add_option("--out", out, "Index output file")->required();
        sub->final_callback([this] { run(); });
    }

    void run() {
        pqt_quantizer* rawq = nullptr;
        check(pqt_quantizer_load(codebook.c_str(), &rawq), "read " + codebook);
        QuantizerPtr q(rawq);
        auto base = data.load();
        pqt_index* rawi = nullptr;
        check(pqt_index_build(q.get(), base.get(), tables, &rawi), "build");
        IndexPtr index(rawi);
        check(pqt_index_save(index.get(), out.c_str()), "write " + out);

        const std::size_t n = pqt_index_size(index.get());
        const std::size_t t = pqt_index_tables(index.get());
        const std::size_t bits = pqt_index_code_bits(index.get());
        double est = 0, linear = 0;
        check(pqt_estimate_memory(bits, n, pqt_index_dim(index.get()), pqt_index_centroids(index.get()), t, &est,
                                  &linear),
              "estimate memory");
        std::cerr << "chosen T = " << t << (tables == 0 ? " (planned)" : " (override)") << '\n';
        emit({{"command", "build"},
              {"data", data.source()},
              {"N", n},
              {"D", pqt_index_dim(index.get())},
              {"M", pqt_index_subspaces(index.get())},
              {"K", pqt_index_centroids(index.get())},
              {"B", bits},
              {"T", t},
              {"T_source", tables == 0 ? "planned" : "override"},
              {"opq", pqt_index_has_rotation(index.get()) != 0},
              {"memory_estimate_bytes", est},
              {"linear_scan_bytes", linear},
              {"index_bytes", pqt_index_memory_bytes(index.get())},
              {"out", out}});
    }
};

struct QueryCmd {
    std::string index_path, queries, kind = "fvecs", gt, mode = "table";
    std::size_t limit = 0, topk = 1;
    std::uint64_t seed = 1234;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("query", "Run a query set against an index");
        sub->add_option("--index", index_path, "Index file from 'build'")->required();
        sub->add_option("--queries", queries, "Query vectors file")->required();
        sub->add_option("--kind", kind, "Query file kind")->check(CLI::IsMember({"fvecs", "bvecs"}));
        sub->add_option("--limit", limit, "Use at most this many queries (0 = all)");
        sub->add_option("--topk", topk, "Results per query L");
        sub->add_option("--gt", gt, "Ground-truth ivecs for recall");
        sub->add_option("--mode", mode, "table or linear (exhaustive ADC baseline)")
                ->check(CLI::IsMember({"table", "linear"}));
        sub->add_option("--seed", seed, "Echoed in the report");
        sub->final_callback([this] { run(); });
    }

    void run() {
        pqt_index* rawi = nullptr;
        check(pqt_index_load(index_path.c_str(), &rawi), "read " + index_path);
        IndexPtr index(rawi);
        pqt_matrix* rawm = nullptr;
        check(pqt_matrix_read(queries.c_str(), kind.c_str(), limit, &rawm), "read " + queries);
        MatrixPtr qs(rawm);
        if (pqt_matrix_rows(qs.get()) > 0 && pqt_matrix_cols(qs.get()) != pqt_index_dim(index.get())) {
            throw Failure{2, "query dimension " + std::to_string(pqt_matrix_cols(qs.get())) +
                                     " differs from index dimension " +
                                     std::to_string(pqt_index_dim(index.get()))};
        }
        const std::size_t nq = pqt_matrix_rows(qs.get());
        const auto search_mode = mode == "linear" ? PQT_SEARCH_LINEAR : PQT_SEARCH_TABLE;
        const RunResult result = run_queries(index.get(), qs.get(), topk, search_mode);

        json record = {{"command", "query"},
                       {"mode", mode},
                       {"N", pqt_index_size(index.get())},
                       {"M", pqt_index_subspaces(index.get())},
                       {"K", pqt_index_centroids(index.get())},
                       {"B", pqt_index_code_bits(index.get())},
                       {"T", pqt_index_tables(index.get())},
                       {"L", topk},
                       {"seed", seed},
                       {"queries", nq},
                       {"latency", latency_json(result.latency)},
                       {"index_bytes", pqt_index_memory_bytes(index.get())}};
        if (search_mode == PQT_SEARCH_TABLE) {
            record["mean_hashings"] = result.mean_hashings;
        }
        if (!gt.empty()) {
            pqt_groundtruth* rawg = nullptr;
            check(pqt_groundtruth_read(gt.c_str(), limit, &rawg), "read " + gt);
            GroundTruthPtr truth(rawg);
            record["recall"] = recall_json(result, nq, topk, truth.get());
        }
        emit(record);
    }
};

struct BenchCmd {
    DataFlags data;
    std::string queries, gt;
    std::size_t nq = 100, train_size = 10000, iters = 25, tables = 0;
    std::vector<std::size_t> sizes, bits, topks{1, 10, 100};

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("bench", "Sweep database size and code length, table vs linear scan");
        data.add(sub);
        sub->add_option("--seed", data.seed, "Random seed");
        sub->add_option("--queries", queries, "Query vectors file (with --data)");
        sub->add_option("--nq", nq, "Query count (synthetic queries, or a limit on --queries)");
        sub->add_option("--sizes", sizes, "Database sizes N (prefixes of the base set)")->delimiter(',');
        sub->add_option("--bits", bits, "Code lengths B (K = 256, M = B/8)")->delimiter(',');
        sub->add_option("--topk", topks, "Values of L")->delimiter(',');
        sub->add_option("--tables", tables, "Table count T (0 = automatic)");
        sub->add_option("--train", train_size, "Training vectors (prefix of the base set)");
        sub->add_option("--iters", iters, "k-means iterations");
        sub->final_callback([this] { run(); });
    }

    void run() {
        if (sizes.empty() || bits.empty() || topks.empty()) {
            return;
        }
        const std::size_t max_n = *std::max_element(sizes.begin(), sizes.end());
        MatrixPtr base, qs;
        if (!data.synthetic.empty()) {
            // Queries come from the same mixture as the base set.
            data.n = max_n;
            auto all = data.load(nq);
            base = slice(all.get(), 0, max_n);
            qs = slice(all.get(), max_n, nq);
        } else {
            if (queries.empty()) {
                throw Failure{2, "bench with --data needs --queries"};
            }
            base = data.load();
            pqt_matrix* rawm = nullptr;
            check(pqt_matrix_read(queries.c_str(), data.kind.c_str(), nq, &rawm), "read " + queries);
            qs.reset(rawm);
        }
        const std::size_t available = pqt_matrix_rows(base.get());
        auto train = slice(base.get(), 0, std::min(train_size, available));

        for (std::size_t b : bits) {
            if (b % 8 != 0 || b == 0) {
                throw Failure{2, "--bits values must be positive multiples of 8"};
            }
            pqt_train_params p = pqt_train_defaults();
            p.subspaces = b / 8;
            p.centroids = 256;
            p.iterations = iters;
            p.seed = data.seed;
            pqt_quantizer* rawq = nullptr;
            check(pqt_quantizer_train(train.get(), &p, &rawq), "train");
            QuantizerPtr q(rawq);

            for (std::size_t n : sizes) {
                if (n > available) {
                    throw Failure{2, "sweep size " + std::to_string(n) + " exceeds the base set"};
                }
                auto prefix = slice(base.get(), 0, n);
                pqt_index* rawi = nullptr;
                check(pqt_index_build(q.get(), prefix.get(), tables, &rawi), "build");
                IndexPtr index(rawi);
                pqt_groundtruth* rawg = nullptr;
                check(pqt_groundtruth_exact(prefix.get(), qs.get(), 1, &rawg), "ground truth");
                GroundTruthPtr truth(rawg);

                for (std::size_t l : topks) {
                    if (l > n) {
                        continue;
                    }
                    const std::size_t count = pqt_matrix_rows(qs.get());
                    const RunResult table = run_queries(index.get(), qs.get(), l, PQT_SEARCH_TABLE);
                    const RunResult linear = run_queries(index.get(), qs.get(), l, PQT_SEARCH_LINEAR);
                    double est = 0, lin_bytes = 0;
                    check(pqt_estimate_memory(b, n, pqt_index_dim(index.get()), 256, pqt_index_tables(index.get()),
                                              &est, &lin_bytes),
                          "estimate memory");
                    emit({{"command", "bench"},
                          {"data", data.source()},
                          {"N", n},
                          {"D", pqt_index_dim(index.get())},
                          {"M", b / 8},
                          {"K", 256},
                          {"B", b},
                          {"T", pqt_index_tables(index.get())},
                          {"L", l},
                          {"seed", data.seed},
                          {"queries", count},
                          {"table", {{"latency", latency_json(table.latency)},
                                     {"mean_hashings", table.mean_hashings},
                                     {"recall", recall_json(table, count, l, truth.get())}}},
                          {"linear", {{"latency", latency_json(linear.latency)},
                                      {"recall", recall_json(linear, count, l, truth.get())}}},
                          {"speedup", table.latency.mean > 0 ? linear.latency.mean / table.latency.mean : 0.0},
                          {"memory_estimate_bytes", est},
                          {"linear_scan_bytes", lin_bytes},
                          {"index_bytes", pqt_index_memory_bytes(index.get())}});
                }
            }
        }
    }
};

struct AnalyzeCmd {
    std::vector<std::size_t> bits{32, 64};
    std::vector<double> sizes{1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8, 1e9};
    std::size_t m = 0;
    bool simulate = false;
    std::uint64_t trials = 1000000, seed = 1234;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("analyze", "Fill rate, expected hashings, slot occupancy and planned T");
        sub->add_option("--bits", bits, "Code lengths B")->delimiter(',');
        sub->add_option("--sizes", sizes, "Database sizes N (e.g. 1e6)")->delimiter(',');
        sub->add_option("--m", m, "Subspaces M for clamping T (default B/8)");
        sub->add_flag("--simulate", simulate, "Add Monte-Carlo uniform-hashing estimates");
        sub->add_option("--trials", trials, "Monte-Carlo queries per configuration");
        sub->add_option("--seed", seed, "Monte-Carlo seed");
        sub->final_callback([this] { run(); });
    }

    void run() {
        for (std::size_t b : bits) {
            for (double size : sizes) {
                if (size < 0 || size != std::floor(size)) {
                    throw Failure{2, "--sizes values must be non-negative integers"};
                }
                const auto n = static_cast<std::uint64_t>(size);
                const std::size_t subspaces = m != 0 ? m : std::max<std::size_t>(1, b / 8);
                double p = 0;
                std::size_t t = 0;
                check(pqt_fill_rate(b, n, &p), "fill rate");
                const auto r_opt = absent_on_error([&](double* out) { return pqt_expected_hashings(b, n, out); });
                const auto occ_opt = absent_on_error([&](double* out) { return pqt_slot_occupancy(b, n, out); });
                const pqt_status ts = pqt_plan_tables(b, n, subspaces, &t);
                json record = {{"command", "analyze"},
                               {"B", b},
                               {"N", n},
                               {"M", subspaces},
                               {"p", p},
                               {"r", optional_json(r_opt)},
                               {"N_nnslot", optional_json(occ_opt)},
                               {"T_star", ts == PQT_OK ? json(t) : json(nullptr)}};
                if (simulate) {
                    double sp = 0, socc = 0;
                    const pqt_status ss = pqt_simulate_hashing(b, n, trials, seed, &sp, &socc);
                    if (ss == PQT_OK) {
                        record["simulated"] = {{"p", sp}, {"N_nnslot", socc}, {"trials", trials}, {"seed", seed}};
                    } else if (ss == PQT_ERR_INVALID_ARGUMENT) {
                        std::cerr << "pqtable: no simulation for B=" << b << " N=" << n << ": "
                                  << pqt_last_error() << "\n";
                        record["simulated"] = nullptr;
                    } else {
                        check(ss, "simulate");
                    }
                }
                emit(record);
            }
        }
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PQTable: hash-table search over product-quantization codes"};
    app.require_subcommand(1);
    TrainCmd train;
    BuildCmd build;
    QueryCmd query;
    BenchCmd bench;
    AnalyzeCmd analyze;
    train.add(app);
    build.add(app);
    query.add(app);
    bench.add(app);
    analyze.add(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const Failure& f) {
        std::cerr << "pqtable: " << f.message << '\n';
        return f.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "pqtable: internal error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
