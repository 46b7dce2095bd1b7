#pragma once

// BIGANN-style vector files (fvecs / bvecs / ivecs), synthetic data,
// PCA alignment and recall.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pqtable/common.hpp"

namespace pqtable {

enum class ElementKind { float32, uint8, int32 };

/// Parses "fvecs", "bvecs" or "ivecs".
ElementKind parse_element_kind(const std::string& name);
const char* element_kind_name(ElementKind kind) noexcept;

/// Vectors loaded from a file. Byte vectors are widened to float on load.
struct VectorDataset {
    ElementKind kind = ElementKind::float32;
    FloatMatrix data;

    std::size_t dim() const noexcept { return data.cols(); }
    std::size_t size() const noexcept { return data.rows(); }
};

/// Per-query ordered nearest-neighbour ids (ivecs).
using GroundTruth = Matrix<std::int32_t>;

/// Reads records of [int32 D][D elements]. Throws format on a record whose D
/// differs from the first one or on a truncated record; io when the file
/// cannot be opened. An int32 kind is rejected here; use read_ivecs.
VectorDataset read_vecs(const std::string& path, ElementKind kind,
                        std::optional<std::size_t> limit = std::nullopt);

GroundTruth read_ivecs(const std::string& path, std::optional<std::size_t> limit = std::nullopt);

/// Writes floats as fvecs, or as bvecs when kind is uint8 (values must be
/// integers in [0, 255]).
void write_vecs(const std::string& path, ElementKind kind, FloatView data);
void write_ivecs(const std::string& path, const GroundTruth& ids);

enum class Distribution { gaussian, clustered };

struct SynthParams {
    Distribution distribution = Distribution::gaussian;
    std::size_t clusters = 128;      // clustered only
    double center_spread = 4.0;      // stddev of the cluster centres
    double cluster_spread = 0.5;     // stddev inside a cluster
};

/// Deterministic for a given seed. Gaussian: i.i.d. N(0, 1). Clustered: a
/// mixture of isotropic Gaussians whose centres are drawn once from the seed.
FloatMatrix synthesize(std::size_t n, std::size_t dim, std::uint64_t seed,
                       const SynthParams& params = {});

/// Centres the data and projects it onto its principal axes, ordered by
/// decreasing variance. Requires N > D.
struct PcaTransform {
    std::vector<double> mean;   // D
    std::vector<double> axes;   // D x D row-major, one principal axis per row
    std::vector<double> variances;

    FloatMatrix apply(FloatView data) const;
};

PcaTransform fit_pca(FloatView data);
FloatMatrix pca_align(FloatView data);

/// Fraction of queries whose true nearest neighbour (ground-truth rank 1)
/// appears among the first R returned ids.
double recall_at(const std::vector<std::vector<Score>>& results, const GroundTruth& gt, std::size_t r);

/// Exact squared-L2 nearest neighbours by brute force; used when no ground
/// truth file is available.
GroundTruth exact_neighbors(FloatView base, FloatView queries, std::size_t k);

}  // namespace pqtable
