#pragma once

// Product quantizer: codebook training, encoding, asymmetric distances and
// the exhaustive linear ADC scan used as the exactness baseline.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "pqtable/common.hpp"

namespace pqtable {

/// M sub-codebooks of K sub-codewords each, every sub-codeword of length D/M.
/// Immutable once built; safe to share between concurrent queries.
class Codebook {
public:
    Codebook() = default;

    /// `codewords` is laid out (m, k, d) row-major: M * K * (D/M) floats.
    Codebook(std::size_t dim, std::size_t subspaces, std::size_t centroids,
             std::vector<float> codewords);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t subspaces() const noexcept { return subspaces_; }
    std::size_t centroids() const noexcept { return centroids_; }
    std::size_t subdim() const noexcept { return subspaces_ ? dim_ / subspaces_ : 0; }

    /// Bits needed for one code element, ceil(log2 K).
    std::size_t bits_per_element() const noexcept;

    /// B = M * log2(K); 8M for K = 256.
    std::size_t code_bits() const noexcept { return subspaces_ * bits_per_element(); }

    std::span<const float> codeword(std::size_t m, std::size_t k) const {
        return {codewords_.data() + (m * centroids_ + k) * subdim(), subdim()};
    }

    std::span<const float> codewords() const noexcept { return codewords_; }

    friend bool operator==(const Codebook&, const Codebook&) = default;

private:
    std::size_t dim_ = 0;
    std::size_t subspaces_ = 0;
    std::size_t centroids_ = 0;
    std::vector<float> codewords_;
};

/// Compact array of N codes. One byte per element when K <= 256, otherwise
/// two bytes (little-endian).
class CodeArray {
public:
    CodeArray() = default;
    CodeArray(std::size_t subspaces, std::size_t centroids);

    static CodeArray from_bytes(std::size_t subspaces, std::size_t centroids, std::size_t count,
                                std::vector<std::uint8_t> bytes);

    std::size_t size() const noexcept { return count_; }
    bool empty() const noexcept { return count_ == 0; }
    std::size_t subspaces() const noexcept { return subspaces_; }
    std::size_t centroids() const noexcept { return centroids_; }
    std::size_t element_bytes() const noexcept { return width_; }

    void reserve(std::size_t n) { bytes_.reserve(n * subspaces_ * width_); }
    void push_back(std::span<const CodeElement> code);

    CodeElement at(std::size_t n, std::size_t m) const noexcept {
        const std::uint8_t* p = bytes_.data() + (n * subspaces_ + m) * width_;
        return width_ == 1 ? p[0] : static_cast<CodeElement>(p[0] | (p[1] << 8));
    }

    void copy_code(std::size_t n, std::span<CodeElement> out) const noexcept;
    PQCode code(std::size_t n) const;

    const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }
    std::size_t memory_bytes() const noexcept { return bytes_.capacity(); }

    friend bool operator==(const CodeArray&, const CodeArray&) = default;

private:
    std::size_t subspaces_ = 0;
    std::size_t centroids_ = 0;
    std::size_t width_ = 1;
    std::size_t count_ = 0;
    std::vector<std::uint8_t> bytes_;
};

/// One entry of a distance-matrix row: sub-codeword index, squared distance
/// from the query sub-vector, and zero-based rank inside the sorted row.
struct DistanceTuple {
    CodeElement k = 0;
    double dist = 0.0;
    std::size_t pos = 0;
};

/// M x K squared distances between the query sub-vectors and every
/// sub-codeword. Lookups by original index k always work; rank-ordered
/// access requires sort_rows().
class DistanceMatrix {
public:
    DistanceMatrix() = default;
    DistanceMatrix(std::size_t subspaces, std::size_t centroids);

    std::size_t subspaces() const noexcept { return subspaces_; }
    std::size_t centroids() const noexcept { return centroids_; }
    bool sorted() const noexcept { return sorted_; }

    double distance(std::size_t m, std::size_t k) const noexcept {
        return dist_[m * centroids_ + k];
    }
    void set_distance(std::size_t m, std::size_t k, double d) noexcept {
        dist_[m * centroids_ + k] = d;
        sorted_ = false;
    }
    std::span<const double> row(std::size_t m) const {
        return {dist_.data() + m * centroids_, centroids_};
    }
    const double* data() const noexcept { return dist_.data(); }

    /// Sorts every row by (dist, k) and assigns ranks.
    void sort_rows();

    /// Tuple at rank `pos` of row m. Requires sorted().
    DistanceTuple at_rank(std::size_t m, std::size_t pos) const;
    /// Tuple for sub-codeword k of row m; pos is meaningful only when sorted().
    DistanceTuple at_index(std::size_t m, std::size_t k) const;

    CodeElement index_at_rank(std::size_t m, std::size_t pos) const noexcept {
        return order_[m * centroids_ + pos];
    }
    CodeElement rank_of(std::size_t m, std::size_t k) const noexcept {
        return rank_[m * centroids_ + k];
    }

    /// Rows [first, first + count) as a standalone matrix (unsorted).
    DistanceMatrix slice(std::size_t first, std::size_t count) const;

private:
    std::size_t subspaces_ = 0;
    std::size_t centroids_ = 0;
    bool sorted_ = false;
    std::vector<double> dist_;
    std::vector<CodeElement> order_;
    std::vector<CodeElement> rank_;
};

struct TrainParams {
    std::size_t subspaces = 8;
    std::size_t centroids = 256;
    std::size_t iterations = 25;
    std::uint64_t seed = 1234;
};

/// Runs k-means independently on each group of sub-vectors. When `trace` is
/// given it receives, per iteration, the total squared quantization error of
/// the assignment step summed over subspaces.
Codebook train_codebook(FloatView data, const TrainParams& params,
                        std::vector<double>* trace = nullptr);

/// Same as above but starts Lloyd iterations from `init` instead of sampling.
Codebook train_codebook(FloatView data, const TrainParams& params, const Codebook& init,
                        std::vector<double>* trace = nullptr);

void encode_into(std::span<const float> x, const Codebook& cb, std::span<CodeElement> out);
PQCode encode(std::span<const float> x, const Codebook& cb);
CodeArray encode_all(FloatView data, const Codebook& cb);

std::vector<float> decode(std::span<const CodeElement> code, const Codebook& cb);

/// Mean squared reconstruction error of `data` under `cb`.
double quantization_error(FloatView data, const Codebook& cb);

DistanceMatrix build_distance_matrix(std::span<const float> q, const Codebook& cb,
                                     bool sort = false);

/// Sum of the M per-subspace distances, accumulated in subspace order.
inline double adc_distance_unchecked(const DistanceMatrix& dm,
                                     std::span<const CodeElement> code) noexcept {
    const double* d = dm.data();
    const std::size_t k = dm.centroids();
    double acc = 0.0;
    for (std::size_t m = 0; m < code.size(); ++m) {
        acc += d[m * k + code[m]];
    }
    return acc;
}

double adc_distance(const DistanceMatrix& dm, std::span<const CodeElement> code);

/// Asymmetric distance of code n inside `codes`; same accumulation order as
/// adc_distance.
double adc_distance(const DistanceMatrix& dm, const CodeArray& codes, std::size_t n) noexcept;

/// The L smallest asymmetric distances over all codes, ascending by
/// (dist, id). Exhaustive; the reference the table search must agree with.
std::vector<Score> linear_adc_scan(std::span<const float> q, const CodeArray& codes,
                                   const Codebook& cb, std::size_t topk);
std::vector<Score> linear_adc_scan(std::span<const float> q, std::span<const PQCode> codes,
                                   const Codebook& cb, std::size_t topk);
/// Scan with a prebuilt distance matrix.
std::vector<Score> linear_adc_scan(const DistanceMatrix& dm, const CodeArray& codes,
                                   std::size_t topk);

void write_codebook(std::ostream& out, const Codebook& cb);
Codebook read_codebook(std::istream& in);

}  // namespace pqtable
