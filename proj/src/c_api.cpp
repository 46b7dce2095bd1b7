#include "pqtable/pqtable.h"

#include <algorithm>
#include <new>
#include <string>

#include "pqtable/analysis.hpp"
#include "pqtable/dataset_io.hpp"
#include "pqtable/index.hpp"

struct pqt_matrix {
    pqtable::FloatMatrix m;
};

struct pqt_groundtruth {
    pqtable::GroundTruth gt;
};

struct pqt_quantizer {
    pqtable::Quantizer q;
};

struct pqt_index {
    pqtable::Index index;
};

namespace {

thread_local std::string g_last_error;

pqt_status to_status(pqtable::ErrorCode code) {
    using pqtable::ErrorCode;
    switch (code) {
        case ErrorCode::invalid_argument: return PQT_ERR_INVALID_ARGUMENT;
        case ErrorCode::dimension_mismatch: return PQT_ERR_DIMENSION_MISMATCH;
        case ErrorCode::insufficient_data: return PQT_ERR_INSUFFICIENT_DATA;
        case ErrorCode::out_of_range: return PQT_ERR_OUT_OF_RANGE;
        case ErrorCode::exhausted: return PQT_ERR_EXHAUSTED;
        case ErrorCode::empty_database: return PQT_ERR_EMPTY_DATABASE;
        case ErrorCode::io: return PQT_ERR_IO;
        case ErrorCode::format: return PQT_ERR_FORMAT;
        case ErrorCode::internal: return PQT_ERR_INTERNAL;
    }
    return PQT_ERR_INTERNAL;
}

template <class Fn>
pqt_status guard(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return PQT_OK;
    } catch (const pqtable::Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return PQT_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return PQT_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return PQT_ERR_INTERNAL;
    }
}

void require(const void* p, const char* what) {
    if (p == nullptr) {
        PQTABLE_THROW(invalid_argument, std::string(what) + " is null");
    }
}

std::optional<std::size_t> limit_of(size_t limit) {
    return limit == 0 ? std::nullopt : std::optional<std::size_t>(limit);
}

}  // namespace

extern "C" {

const char* pqt_status_name(pqt_status status) {
    switch (status) {
        case PQT_OK: return "ok";
        case PQT_ERR_INVALID_ARGUMENT: return "invalid_argument";
        case PQT_ERR_DIMENSION_MISMATCH: return "dimension_mismatch";
        case PQT_ERR_INSUFFICIENT_DATA: return "insufficient_data";
        case PQT_ERR_OUT_OF_RANGE: return "out_of_range";
        case PQT_ERR_EXHAUSTED: return "exhausted";
        case PQT_ERR_EMPTY_DATABASE: return "empty_database";
        case PQT_ERR_IO: return "io";
        case PQT_ERR_FORMAT: return "format";
        case PQT_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* pqt_last_error(void) { return g_last_error.c_str(); }

// ---- matrices

pqt_status pqt_matrix_read(const char* path, const char* kind, size_t limit, pqt_matrix** out) {
    return guard([&] {
        require(path, "path");
        require(kind, "kind");
        require(out, "out");
        auto ds = pqtable::read_vecs(path, pqtable::parse_element_kind(kind), limit_of(limit));
        *out = new pqt_matrix{std::move(ds.data)};
    });
}

pqt_status pqt_matrix_write(const pqt_matrix* m, const char* path, const char* kind) {
    return guard([&] {
        require(m, "matrix");
        require(path, "path");
        require(kind, "kind");
        pqtable::write_vecs(path, pqtable::parse_element_kind(kind), m->m.view());
    });
}

pqt_status pqt_matrix_create(const float* data, size_t rows, size_t cols, pqt_matrix** out) {
    return guard([&] {
        require(out, "out");
        if (rows * cols > 0) {
            require(data, "data");
        }
        *out = new pqt_matrix{pqtable::FloatMatrix(rows, cols, std::vector<float>(data, data + rows * cols))};
    });
}

pqt_status pqt_matrix_prefix(const pqt_matrix* m, size_t rows, pqt_matrix** out) {
    return guard([&] {
        require(m, "matrix");
        require(out, "out");
        const auto view = m->m.view().prefix(rows);
        *out = new pqt_matrix{pqtable::FloatMatrix(
                view.rows, view.cols, std::vector<float>(view.data, view.data + view.rows * view.cols))};
    });
}

pqt_synth_params pqt_synth_defaults(void) {
    const pqtable::SynthParams d;
    return {PQT_GAUSSIAN, d.clusters, d.center_spread, d.cluster_spread};
}

pqt_status pqt_matrix_synthesize(size_t n, size_t dim, uint64_t seed, const pqt_synth_params* params,
                                 pqt_matrix** out) {
    return guard([&] {
        require(out, "out");
        pqtable::SynthParams p;
        if (params != nullptr) {
            p.distribution = params->distribution == PQT_CLUSTERED ? pqtable::Distribution::clustered
                                                                   : pqtable::Distribution::gaussian;
            p.clusters = params->clusters;
            p.center_spread = params->center_spread;
            p.cluster_spread = params->cluster_spread;
        }
        *out = new pqt_matrix{pqtable::synthesize(n, dim, seed, p)};
    });
}

pqt_status pqt_matrix_pca_align(const pqt_matrix* m, pqt_matrix** out) {
    return guard([&] {
        require(m, "matrix");
        require(out, "out");
        *out = new pqt_matrix{pqtable::pca_align(m->m.view())};
    });
}

size_t pqt_matrix_rows(const pqt_matrix* m) { return m ? m->m.rows() : 0; }
size_t pqt_matrix_cols(const pqt_matrix* m) { return m ? m->m.cols() : 0; }
const float* pqt_matrix_data(const pqt_matrix* m) { return m ? m->m.data() : nullptr; }
void pqt_matrix_free(pqt_matrix* m) { delete m; }

// ---- ground truth

pqt_status pqt_groundtruth_read(const char* path, size_t limit, pqt_groundtruth** out) {
    return guard([&] {
        require(path, "path");
        require(out, "out");
        *out = new pqt_groundtruth{pqtable::read_ivecs(path, limit_of(limit))};
    });
}

pqt_status pqt_groundtruth_write(const pqt_groundtruth* gt, const char* path) {
    return guard([&] {
        require(gt, "ground truth");
        require(path, "path");
        pqtable::write_ivecs(path, gt->gt);
    });
}

pqt_status pqt_groundtruth_exact(const pqt_matrix* base, const pqt_matrix* queries, size_t k,
                                 pqt_groundtruth** out) {
    return guard([&] {
        require(base, "base");
        require(queries, "queries");
        require(out, "out");
        *out = new pqt_groundtruth{pqtable::exact_neighbors(base->m.view(), queries->m.view(), k)};
    });
}

size_t pqt_groundtruth_rows(const pqt_groundtruth* gt) { return gt ? gt->gt.rows() : 0; }
size_t pqt_groundtruth_cols(const pqt_groundtruth* gt) { return gt ? gt->gt.cols() : 0; }
const int32_t* pqt_groundtruth_data(const pqt_groundtruth* gt) { return gt ? gt->gt.data() : nullptr; }
void pqt_groundtruth_free(pqt_groundtruth* gt) { delete gt; }

// ---- quantizer

pqt_train_params pqt_train_defaults(void) {
    const pqtable::OpqParams d;
    return {d.pq.subspaces, d.pq.centroids, d.pq.iterations, d.pq.seed, 0, d.outer_iterations};
}

pqt_status pqt_quantizer_train(const pqt_matrix* data, const pqt_train_params* params, pqt_quantizer** out) {
    return guard([&] {
        require(data, "data");
        require(params, "params");
        require(out, "out");
        pqtable::TrainParams tp{params->subspaces, params->centroids, params->iterations, params->seed};
        auto* q = new pqt_quantizer{};
        try {
            if (params->opq != 0) {
                pqtable::OpqParams op;
                op.pq = tp;
                op.outer_iterations = params->opq_iterations;
                auto result = pqtable::train_rotation(data->m.view(), op);
                q->q.codebook = std::move(result.codebook);
                q->q.rotation = std::move(result.rotation);
            } else {
                q->q.codebook = pqtable::train_codebook(data->m.view(), tp);
            }
        } catch (...) {
            delete q;
            throw;
        }
        *out = q;
    });
}

pqt_status pqt_quantizer_error(const pqt_quantizer* q, const pqt_matrix* data, double* out) {
    return guard([&] {
        require(q, "quantizer");
        require(data, "data");
        require(out, "out");
        if (q->q.rotation) {
            *out = pqtable::quantization_error(pqtable::rotate_all(*q->q.rotation, data->m.view()).view(),
                                               q->q.codebook);
        } else {
            *out = pqtable::quantization_error(data->m.view(), q->q.codebook);
        }
    });
}

pqt_status pqt_quantizer_save(const pqt_quantizer* q, const char* path) {
    return guard([&] {
        require(q, "quantizer");
        require(path, "path");
        pqtable::write_quantizer(path, q->q);
    });
}

pqt_status pqt_quantizer_load(const char* path, pqt_quantizer** out) {
    return guard([&] {
        require(path, "path");
        require(out, "out");
        *out = new pqt_quantizer{pqtable::read_quantizer(path)};
    });
}

size_t pqt_quantizer_dim(const pqt_quantizer* q) { return q ? q->q.codebook.dim() : 0; }
size_t pqt_quantizer_subspaces(const pqt_quantizer* q) { return q ? q->q.codebook.subspaces() : 0; }
size_t pqt_quantizer_centroids(const pqt_quantizer* q) { return q ? q->q.codebook.centroids() : 0; }
size_t pqt_quantizer_code_bits(const pqt_quantizer* q) { return q ? q->q.codebook.code_bits() : 0; }
int pqt_quantizer_has_rotation(const pqt_quantizer* q) { return q && q->q.rotation ? 1 : 0; }
void pqt_quantizer_free(pqt_quantizer* q) { delete q; }

// ---- index

pqt_status pqt_index_build(const pqt_quantizer* q, const pqt_matrix* data, size_t tables, pqt_index** out) {
    return guard([&] {
        require(q, "quantizer");
        require(data, "data");
        require(out, "out");
        *out = new pqt_index{pqtable::Index::build(q->q, data->m.view(), tables)};
    });
}

pqt_status pqt_index_save(const pqt_index* index, const char* path) {
    return guard([&] {
        require(index, "index");
        require(path, "path");
        index->index.write(path);
    });
}

pqt_status pqt_index_load(const char* path, pqt_index** out) {
    return guard([&] {
        require(path, "path");
        require(out, "out");
        *out = new pqt_index{pqtable::Index::read(path)};
    });
}

pqt_status pqt_index_search(const pqt_index* index, const float* query, size_t dim, size_t topk,
                            pqt_search_mode mode, pqt_result* results, size_t* count,
                            pqt_query_stats* stats) {
    return guard([&] {
        require(index, "index");
        require(query, "query");
        require(results, "results");
        require(count, "count");
        const std::span<const float> q(query, dim);
        std::vector<pqtable::Score> found;
        if (mode == PQT_SEARCH_LINEAR) {
            found = index->index.linear_search(q, topk);
        } else {
            pqtable::QueryStats qs;
            found = index->index.search(q, topk, stats ? &qs : nullptr);
            if (stats != nullptr) {
                *stats = {qs.hashings, qs.first_hit, qs.candidates, qs.marked};
            }
        }
        const std::size_t n = std::min(found.size(), topk);
        for (std::size_t i = 0; i < n; ++i) {
            results[i] = {found[i].id, found[i].dist};
        }
        *count = n;
    });
}

size_t pqt_index_size(const pqt_index* index) { return index ? index->index.size() : 0; }
size_t pqt_index_dim(const pqt_index* index) { return index ? index->index.dim() : 0; }
size_t pqt_index_tables(const pqt_index* index) { return index ? index->index.tables() : 0; }
size_t pqt_index_subspaces(const pqt_index* index) {
    return index ? index->index.codebook().subspaces() : 0;
}
size_t pqt_index_centroids(const pqt_index* index) {
    return index ? index->index.codebook().centroids() : 0;
}
size_t pqt_index_code_bits(const pqt_index* index) {
    return index ? index->index.codebook().code_bits() : 0;
}
int pqt_index_has_rotation(const pqt_index* index) { return index && index->index.rotation() ? 1 : 0; }
size_t pqt_index_memory_bytes(const pqt_index* index) { return index ? index->index.memory_bytes() : 0; }
void pqt_index_free(pqt_index* index) { delete index; }

// ---- metrics and analysis

pqt_status pqt_recall_at(const pqt_result* results, size_t queries, size_t stride, const pqt_groundtruth* gt,
                         size_t r, double* out) {
    return guard([&] {
        require(gt, "ground truth");
        require(out, "out");
        if (queries > 0) {
            require(results, "results");
        }
        PQTABLE_CHECK(r <= stride, invalid_argument, "R exceeds the returned list length");
        std::vector<std::vector<pqtable::Score>> lists(queries);
        for (std::size_t q = 0; q < queries; ++q) {
            lists[q].reserve(stride);
            for (std::size_t i = 0; i < stride; ++i) {
                const pqt_result& res = results[q * stride + i];
                lists[q].push_back({res.id, res.dist});
            }
        }
        *out = pqtable::recall_at(lists, gt->gt, r);
    });
}

pqt_status pqt_plan_tables(size_t code_bits, uint64_t n, size_t subspaces, size_t* out) {
    return guard([&] {
        require(out, "out");
        *out = pqtable::plan_tables(code_bits, n, subspaces);
    });
}

pqt_status pqt_fill_rate(size_t bits, uint64_t n, double* out) {
    return guard([&] {
        require(out, "out");
        *out = pqtable::fill_rate(bits, n);
    });
}

pqt_status pqt_expected_hashings(size_t bits, uint64_t n, double* out) {
    return guard([&] {
        require(out, "out");
        *out = pqtable::expected_hashings(bits, n);
    });
}

pqt_status pqt_slot_occupancy(size_t bits, uint64_t n, double* out) {
    return guard([&] {
        require(out, "out");
        *out = pqtable::slot_occupancy(bits, n);
    });
}

pqt_status pqt_estimate_memory(size_t bits, uint64_t n, size_t dim, size_t centroids, size_t tables,
                               double* table_bytes, double* linear_scan_bytes) {
    return guard([&] {
        require(table_bytes, "table_bytes");
        require(linear_scan_bytes, "linear_scan_bytes");
        const auto est = pqtable::estimate_memory(bits, n, dim, centroids, tables);
        *table_bytes = est.table_bytes;
        *linear_scan_bytes = est.linear_scan_bytes;
    });
}

pqt_status pqt_simulate_hashing(size_t bits, uint64_t n, uint64_t trials, uint64_t seed, double* fill_rate,
                                double* slot_occupancy) {
    return guard([&] {
        require(fill_rate, "fill_rate");
        require(slot_occupancy, "slot_occupancy");
        const auto sim = pqtable::simulate_uniform_hashing(bits, n, trials, seed);
        *fill_rate = sim.fill_rate;
        *slot_occupancy = sim.slot_occupancy;
    });
}

}  // extern "C"
