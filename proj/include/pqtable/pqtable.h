#ifndef PQTABLE_PQTABLE_H
#define PQTABLE_PQTABLE_H

/* C interface to the PQTable library. Every fallible call returns a
 * pqt_status; on failure pqt_last_error() describes the problem for the
 * calling thread. Objects are opaque handles released with their _free call
 * (passing NULL is allowed). */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PQT_API __declspec(dllexport)
#else
#define PQT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pqt_status {
    PQT_OK = 0,
    PQT_ERR_INVALID_ARGUMENT = 1,
    PQT_ERR_DIMENSION_MISMATCH = 2,
    PQT_ERR_INSUFFICIENT_DATA = 3,
    PQT_ERR_OUT_OF_RANGE = 4,
    PQT_ERR_EXHAUSTED = 5,
    PQT_ERR_EMPTY_DATABASE = 6,
    PQT_ERR_IO = 7,
    PQT_ERR_FORMAT = 8,
    PQT_ERR_INTERNAL = 9
} pqt_status;

PQT_API const char* pqt_status_name(pqt_status status);
PQT_API const char* pqt_last_error(void);

/* ---- float matrices (datasets, query sets) ---- */

typedef struct pqt_matrix pqt_matrix;

/* kind is "fvecs" or "bvecs"; limit 0 reads every record. */
PQT_API pqt_status pqt_matrix_read(const char* path, const char* kind, size_t limit, pqt_matrix** out);
PQT_API pqt_status pqt_matrix_write(const pqt_matrix* m, const char* path, const char* kind);
/* Copies rows x cols floats. */
PQT_API pqt_status pqt_matrix_create(const float* data, size_t rows, size_t cols, pqt_matrix** out);
/* New matrix holding the first `rows` rows of m. */
PQT_API pqt_status pqt_matrix_prefix(const pqt_matrix* m, size_t rows, pqt_matrix** out);

typedef enum pqt_distribution { PQT_GAUSSIAN = 0, PQT_CLUSTERED = 1 } pqt_distribution;

typedef struct pqt_synth_params {
    pqt_distribution distribution;
    size_t clusters;
    double center_spread;
    double cluster_spread;
} pqt_synth_params;

/* Defaults: gaussian, 128 clusters, centre spread 4, cluster spread 0.5. */
PQT_API pqt_synth_params pqt_synth_defaults(void);
PQT_API pqt_status pqt_matrix_synthesize(size_t n, size_t dim, uint64_t seed, const pqt_synth_params* params,
                                         pqt_matrix** out);
/* Projection onto the principal axes, largest variance first. Needs rows > cols. */
PQT_API pqt_status pqt_matrix_pca_align(const pqt_matrix* m, pqt_matrix** out);

PQT_API size_t pqt_matrix_rows(const pqt_matrix* m);
PQT_API size_t pqt_matrix_cols(const pqt_matrix* m);
PQT_API const float* pqt_matrix_data(const pqt_matrix* m);
PQT_API void pqt_matrix_free(pqt_matrix* m);

/* ---- ground truth (ivecs) ---- */

typedef struct pqt_groundtruth pqt_groundtruth;

PQT_API pqt_status pqt_groundtruth_read(const char* path, size_t limit, pqt_groundtruth** out);
PQT_API pqt_status pqt_groundtruth_write(const pqt_groundtruth* gt, const char* path);
/* Brute-force k nearest neighbours of every query row. */
PQT_API pqt_status pqt_groundtruth_exact(const pqt_matrix* base, const pqt_matrix* queries, size_t k,
                                         pqt_groundtruth** out);
PQT_API size_t pqt_groundtruth_rows(const pqt_groundtruth* gt);
PQT_API size_t pqt_groundtruth_cols(const pqt_groundtruth* gt);
PQT_API const int32_t* pqt_groundtruth_data(const pqt_groundtruth* gt);
PQT_API void pqt_groundtruth_free(pqt_groundtruth* gt);

/* ---- quantizer (codebook, optional OPQ rotation) ---- */

typedef struct pqt_quantizer pqt_quantizer;

typedef struct pqt_train_params {
    size_t subspaces;        /* M */
    size_t centroids;        /* K */
    size_t iterations;       /* k-means iterations */
    uint64_t seed;
    int opq;                 /* nonzero: learn a rotation as well */
    size_t opq_iterations;   /* outer alternations when opq is set */
} pqt_train_params;

/* M = 8, K = 256, 25 iterations, seed 1234, no OPQ, 10 alternations. */
PQT_API pqt_train_params pqt_train_defaults(void);
PQT_API pqt_status pqt_quantizer_train(const pqt_matrix* data, const pqt_train_params* params,
                                       pqt_quantizer** out);
/* Mean squared reconstruction error of data (rotated first when applicable). */
PQT_API pqt_status pqt_quantizer_error(const pqt_quantizer* q, const pqt_matrix* data, double* out);
PQT_API pqt_status pqt_quantizer_save(const pqt_quantizer* q, const char* path);
PQT_API pqt_status pqt_quantizer_load(const char* path, pqt_quantizer** out);
PQT_API size_t pqt_quantizer_dim(const pqt_quantizer* q);
PQT_API size_t pqt_quantizer_subspaces(const pqt_quantizer* q);
PQT_API size_t pqt_quantizer_centroids(const pqt_quantizer* q);
PQT_API size_t pqt_quantizer_code_bits(const pqt_quantizer* q);
PQT_API int pqt_quantizer_has_rotation(const pqt_quantizer* q);
PQT_API void pqt_quantizer_free(pqt_quantizer* q);

/* ---- index ---- */

typedef struct pqt_index pqt_index;

typedef enum pqt_search_mode { PQT_SEARCH_TABLE = 0, PQT_SEARCH_LINEAR = 1 } pqt_search_mode;

typedef struct pqt_result {
    uint32_t id;
    double dist;
} pqt_result;

typedef struct pqt_query_stats {
    size_t hashings;
    size_t first_hit;
    size_t candidates;
    size_t marked;
} pqt_query_stats;

/* tables == 0 chooses T automatically. */
PQT_API pqt_status pqt_index_build(const pqt_quantizer* q, const pqt_matrix* data, size_t tables,
                                   pqt_index** out);
PQT_API pqt_status pqt_index_save(const pqt_index* index, const char* path);
PQT_API pqt_status pqt_index_load(const char* path, pqt_index** out);

/* Writes min(topk, N) results to `results` (capacity topk) in ascending
 * distance and their number to *count. stats may be NULL; it is only filled
 * in table mode. */
PQT_API pqt_status pqt_index_search(const pqt_index* index, const float* query, size_t dim, size_t topk,
                                    pqt_search_mode mode, pqt_result* results, size_t* count,
                                    pqt_query_stats* stats);

PQT_API size_t pqt_index_size(const pqt_index* index);
PQT_API size_t pqt_index_dim(const pqt_index* index);
PQT_API size_t pqt_index_tables(const pqt_index* index);
PQT_API size_t pqt_index_subspaces(const pqt_index* index);
PQT_API size_t pqt_index_centroids(const pqt_index* index);
PQT_API size_t pqt_index_code_bits(const pqt_index* index);
PQT_API int pqt_index_has_rotation(const pqt_index* index);
PQT_API size_t pqt_index_memory_bytes(const pqt_index* index);
PQT_API void pqt_index_free(pqt_index* index);

/* ---- metrics and analysis ---- */

/* results holds `queries` rows of `stride` entries; the first r entries of
 * each row are compared against ground-truth rank 1. */
PQT_API pqt_status pqt_recall_at(const pqt_result* results, size_t queries, size_t stride,
                                 const pqt_groundtruth* gt, size_t r, double* out);

PQT_API pqt_status pqt_plan_tables(size_t code_bits, uint64_t n, size_t subspaces, size_t* out);
PQT_API pqt_status pqt_fill_rate(size_t bits, uint64_t n, double* out);
PQT_API pqt_status pqt_expected_hashings(size_t bits, uint64_t n, double* out);
PQT_API pqt_status pqt_slot_occupancy(size_t bits, uint64_t n, double* out);
PQT_API pqt_status pqt_estimate_memory(size_t bits, uint64_t n, size_t dim, size_t centroids, size_t tables,
                                       double* table_bytes, double* linear_scan_bytes);
/* Monte-Carlo uniform hashing; n is limited to 2^25 (PQT_ERR_INVALID_ARGUMENT above). */
PQT_API pqt_status pqt_simulate_hashing(size_t bits, uint64_t n, uint64_t trials, uint64_t seed,
                                        double* fill_rate, double* slot_occupancy);

#ifdef __cplusplus
}
#endif

#endif
