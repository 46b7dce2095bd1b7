#include "pqtable/dataset_io.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "binary_io.hpp"

namespace pqtable {

ElementKind parse_element_kind(const std::string& name) {
    if (name == "fvecs" || name == "float32") {
        return ElementKind::float32;
    }
    if (name == "bvecs" || name == "uint8") {
        return ElementKind::uint8;
    }
    if (name == "ivecs" || name == "int32") {
        return ElementKind::int32;
    }
    PQTABLE_THROW(invalid_argument, "unknown vector file kind '" + name + "'");
}

const char* element_kind_name(ElementKind kind) noexcept {
    switch (kind) {
        case ElementKind::float32: return "fvecs";
        case ElementKind::uint8: return "bvecs";
        case ElementKind::int32: return "ivecs";
    }
    return "unknown";
}

namespace {

std::size_t element_size(ElementKind kind) { return kind == ElementKind::uint8 ? 1 : 4; }

// Reads whole records into `out` (raw element bytes, dimension headers
// stripped). Returns (count, dim).
std::pair<std::size_t, std::size_t> read_records(const std::string& path, ElementKind kind,
                                                 std::optional<std::size_t> limit,
                                                 std::vector<std::uint8_t>& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        PQTABLE_THROW(io, "cannot open '" + path + "'");
    }
    const std::size_t esize = element_size(kind);
    std::size_t dim = 0;
    std::size_t count = 0;
    std::array<std::uint8_t, 4> header{};
    while (!limit || count < *limit) {
        in.read(reinterpret_cast<char*>(header.data()), 4);
        if (in.gcount() == 0) {
            break;
        }
        if (in.gcount() != 4) {
            PQTABLE_THROW(format, "truncated-file: partial dimension header in '" + path + "'");
        }
        const auto d = static_cast<std::int32_t>(detail::decode_u32(header.data()));
        if (d <= 0) {
            PQTABLE_THROW(format, "malformed-header: non-positive dimension in '" + path + "'");
        }
        if (count == 0) {
            dim = static_cast<std::size_t>(d);
        } else if (static_cast<std::size_t>(d) != dim) {
            PQTABLE_THROW(format, "malformed-header: record " + std::to_string(count) +
                                          " declares dimension " + std::to_string(d) + ", expected " +
                                          std::to_string(dim));
        }
        const std::size_t offset = out.size();
        out.resize(offset + dim * esize);
        in.read(reinterpret_cast<char*>(out.data() + offset), static_cast<std::streamsize>(dim * esize));
        if (static_cast<std::size_t>(in.gcount()) != dim * esize) {
            PQTABLE_THROW(format, "truncated-file: record " + std::to_string(count) + " of '" + path +
                                          "' is incomplete");
        }
        ++count;
    }
    return {count, dim};
}

}  // namespace

VectorDataset read_vecs(const std::string& path, ElementKind kind, std::optional<std::size_t> limit) {
    PQTABLE_CHECK(kind != ElementKind::int32, invalid_argument,
                  "int32 vectors are identifiers; read them with read_ivecs");
    std::vector<std::uint8_t> raw;
    const auto [count, dim] = read_records(path, kind, limit, raw);
    std::vector<float> values(count * dim);
    if (kind == ElementKind::uint8) {
        std::transform(raw.begin(), raw.end(), values.begin(),
                       [](std::uint8_t b) { return static_cast<float>(b); });
    } else {
        for (std::size_t i = 0; i < values.size(); ++i) {
            const std::uint32_t bits = detail::decode_u32(raw.data() + 4 * i);
            std::memcpy(&values[i], &bits, 4);
        }
    }
    return {kind, FloatMatrix(count, dim, std::move(values))};
}

GroundTruth read_ivecs(const std::string& path, std::optional<std::size_t> limit) {
    std::vector<std::uint8_t> raw;
    const auto [count, dim] = read_records(path, ElementKind::int32, limit, raw);
    std::vector<std::int32_t> values(count * dim);
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = static_cast<std::int32_t>(detail::decode_u32(raw.data() + 4 * i));
    }
    return GroundTruth(count, dim, std::move(values));
}

void write_vecs(const std::string& path, ElementKind kind, FloatView data) {
    PQTABLE_CHECK(kind != ElementKind::int32, invalid_argument, "use write_ivecs for int32 vectors");
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        PQTABLE_THROW(io, "cannot create '" + path + "'");
    }
    std::vector<std::uint8_t> bytes(data.cols);
    for (std::size_t i = 0; i < data.rows; ++i) {
        detail::write_u32(out, static_cast<std::uint32_t>(data.cols));
        const auto row = data.row(i);
        if (kind == ElementKind::uint8) {
            for (std::size_t j = 0; j < row.size(); ++j) {
                const float v = row[j];
                PQTABLE_CHECK(v >= 0.0f && v <= 255.0f && std::floor(v) == v, invalid_argument,
                              "bvecs values must be integers in [0, 255]");
                bytes[j] = static_cast<std::uint8_t>(v);
            }
            detail::write_bytes(out, bytes.data(), bytes.size());
        } else {
            detail::write_f32_array(out, row);
        }
    }
}

void write_ivecs(const std::string& path, const GroundTruth& ids) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        PQTABLE_THROW(io, "cannot create '" + path + "'");
    }
    for (std::size_t i = 0; i < ids.rows(); ++i) {
        detail::write_u32(out, static_cast<std::uint32_t>(ids.cols()));
        for (std::int32_t v : ids.row(i)) {
            detail::write_u32(out, static_cast<std::uint32_t>(v));
        }
    }
}

FloatMatrix synthesize(std::size_t n, std::size_t dim, std::uint64_t seed, const SynthParams& params) {
    PQTABLE_CHECK(n >= 1 && dim >= 1, invalid_argument, "synthetic data needs N, D >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    FloatMatrix out(n, dim);
    if (params.distribution == Distribution::gaussian) {
        for (std::size_t i = 0; i < n; ++i) {
            for (float& v : out.row(i)) {
                v = static_cast<float>(gauss(rng));
            }
        }
        return out;
    }

    PQTABLE_CHECK(params.clusters >= 1, invalid_argument, "clustered data needs at least one cluster");
    std::vector<double> centers(params.clusters * dim);
    for (double& c : centers) {
        c = params.center_spread * gauss(rng);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = static_cast<std::size_t>(rng() % params.clusters);
        auto row = out.row(i);
        for (std::size_t j = 0; j < dim; ++j) {
            row[j] = static_cast<float>(centers[c * dim + j] + params.cluster_spread * gauss(rng));
        }
    }
    return out;
}

PcaTransform fit_pca(FloatView data) {
    const std::size_t n = data.rows;
    const std::size_t d = data.cols;
    PQTABLE_CHECK(n > d, invalid_argument, "degenerate covariance: PCA needs more vectors than dimensions");

    PcaTransform pca;
    pca.mean.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = data.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            pca.mean[j] += row[j];
        }
    }
    for (double& m : pca.mean) {
        m /= static_cast<double>(n);
    }

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    Eigen::VectorXd centered(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = data.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            centered(static_cast<Eigen::Index>(j)) = row[j] - pca.mean[j];
        }
        cov.selfadjointView<Eigen::Lower>().rankUpdate(centered);
    }
    cov = cov.selfadjointView<Eigen::Lower>();
    cov /= static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    PQTABLE_CHECK(eig.info() == Eigen::Success, internal, "covariance eigendecomposition failed");
    // Eigen returns ascending eigenvalues; emit the axes largest first.
    pca.axes.resize(d * d);
    pca.variances.resize(d);
    for (std::size_t r = 0; r < d; ++r) {
        const auto src = static_cast<Eigen::Index>(d - 1 - r);
        pca.variances[r] = eig.eigenvalues()(src);
        for (std::size_t c = 0; c < d; ++c) {
            pca.axes[r * d + c] = eig.eigenvectors()(static_cast<Eigen::Index>(c), src);
        }
    }
    return pca;
}

FloatMatrix PcaTransform::apply(FloatView data) const {
    const std::size_t d = mean.size();
    PQTABLE_CHECK(data.cols == d, dimension_mismatch, "data dimension differs from the PCA fit");
    FloatMatrix out(data.rows, d);
    std::vector<double> centered(d);
    for (std::size_t i = 0; i < data.rows; ++i) {
        const auto row = data.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            centered[j] = row[j] - mean[j];
        }
        auto dst = out.row(i);
        for (std::size_t r = 0; r < d; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                acc += axes[r * d + c] * centered[c];
            }
            dst[r] = static_cast<float>(acc);
        }
    }
    return out;
}

FloatMatrix pca_align(FloatView data) { return fit_pca(data).apply(data); }

double recall_at(const std::vector<std::vector<Score>>& results, const GroundTruth& gt, std::size_t r) {
    PQTABLE_CHECK(results.size() == gt.rows(), invalid_argument,
                  "length-mismatch: result and ground-truth query counts differ");
    PQTABLE_CHECK(gt.cols() >= 1, invalid_argument, "ground truth has no neighbours");
    PQTABLE_CHECK(r >= 1, invalid_argument, "R must be at least 1");
    if (results.empty()) {
        return 0.0;
    }
    std::size_t hits = 0;
    for (std::size_t q = 0; q < results.size(); ++q) {
        PQTABLE_CHECK(results[q].size() >= r, invalid_argument, "R exceeds the returned list length");
        const auto truth = static_cast<RecordId>(gt.row(q)[0]);
        const auto end = results[q].begin() + static_cast<std::ptrdiff_t>(r);
        if (std::any_of(results[q].begin(), end, [truth](const Score& s) { return s.id == truth; })) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

GroundTruth exact_neighbors(FloatView base, FloatView queries, std::size_t k) {
    PQTABLE_CHECK(base.cols == queries.cols, dimension_mismatch, "base and query dimensions differ");
    PQTABLE_CHECK(k >= 1 && k <= base.rows, invalid_argument, "k must be in [1, N]");
    GroundTruth gt(queries.rows, k);
    std::vector<Score> all(base.rows);
    for (std::size_t q = 0; q < queries.rows; ++q) {
        for (std::size_t i = 0; i < base.rows; ++i) {
            all[i] = {static_cast<RecordId>(i), squared_l2(queries.row(q), base.row(i))};
        }
        std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
        for (std::size_t j = 0; j < k; ++j) {
            gt.row(q)[j] = static_cast<std::int32_t>(all[j].id);
        }
    }
    return gt;
}

}  // namespace pqtable
