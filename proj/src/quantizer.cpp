#include "pqtable/quantizer.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <string>
#include <unordered_set>

#include "binary_io.hpp"

namespace pqtable {

const char* error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid-argument";
        case ErrorCode::dimension_mismatch: return "dimension-mismatch";
        case ErrorCode::insufficient_data: return "insufficient-training-data";
        case ErrorCode::out_of_range: return "index-out-of-range";
        case ErrorCode::exhausted: return "exhausted";
        case ErrorCode::empty_database: return "empty-database";
        case ErrorCode::io: return "io";
        case ErrorCode::format: return "format";
        case ErrorCode::internal: return "internal";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Codebook

Codebook::Codebook(std::size_t dim, std::size_t subspaces, std::size_t centroids,
                   std::vector<float> codewords)
        : dim_(dim), subspaces_(subspaces), centroids_(centroids), codewords_(std::move(codewords)) {
    PQTABLE_CHECK(subspaces_ > 0 && centroids_ > 0 && dim_ > 0, invalid_argument,
                  "codebook needs positive D, M and K");
    PQTABLE_CHECK(dim_ % subspaces_ == 0, invalid_argument,
                  "dimension-not-divisible: D must be a multiple of M");
    PQTABLE_CHECK(centroids_ <= 65536, invalid_argument, "K must be at most 65536");
    PQTABLE_CHECK(codewords_.size() == subspaces_ * centroids_ * subdim(), invalid_argument,
                  "codeword storage does not match M * K * D/M");
}

std::size_t Codebook::bits_per_element() const noexcept {
    if (centroids_ <= 1) {
        return 0;
    }
    return static_cast<std::size_t>(std::bit_width(centroids_ - 1));
}

// ---------------------------------------------------------------------------
// CodeArray

CodeArray::CodeArray(std::size_t subspaces, std::size_t centroids)
        : subspaces_(subspaces), centroids_(centroids), width_(centroids <= 256 ? 1 : 2) {}

CodeArray CodeArray::from_bytes(std::size_t subspaces, std::size_t centroids, std::size_t count,
                                std::vector<std::uint8_t> bytes) {
    CodeArray out(subspaces, centroids);
    PQTABLE_CHECK(bytes.size() == count * subspaces * out.width_, format,
                  "code array size does not match N * M");
    out.count_ = count;
    out.bytes_ = std::move(bytes);
    for (std::size_t n = 0; n < count; ++n) {
        for (std::size_t m = 0; m < subspaces; ++m) {
            PQTABLE_CHECK(out.at(n, m) < centroids, format, "code element out of range");
        }
    }
    return out;
}

void CodeArray::push_back(std::span<const CodeElement> code) {
    PQTABLE_CHECK(code.size() == subspaces_, dimension_mismatch, "code length differs from M");
    for (CodeElement e : code) {
        PQTABLE_CHECK(e < centroids_, out_of_range, "code element exceeds K");
        bytes_.push_back(static_cast<std::uint8_t>(e));
        if (width_ == 2) {
            bytes_.push_back(static_cast<std::uint8_t>(e >> 8));
        }
    }
    ++count_;
}

void CodeArray::copy_code(std::size_t n, std::span<CodeElement> out) const noexcept {
    for (std::size_t m = 0; m < subspaces_; ++m) {
        out[m] = at(n, m);
    }
}

PQCode CodeArray::code(std::size_t n) const {
    PQCode c(subspaces_);
    copy_code(n, c);
    return c;
}

// ---------------------------------------------------------------------------
// DistanceMatrix

DistanceMatrix::DistanceMatrix(std::size_t subspaces, std::size_t centroids)
        : subspaces_(subspaces), centroids_(centroids), dist_(subspaces * centroids, 0.0) {}

void DistanceMatrix::sort_rows() {
    order_.resize(subspaces_ * centroids_);
    rank_.resize(subspaces_ * centroids_);
    for (std::size_t m = 0; m < subspaces_; ++m) {
        CodeElement* order = order_.data() + m * centroids_;
        const double* row = dist_.data() + m * centroids_;
        std::iota(order, order + centroids_, CodeElement{0});
        std::sort(order, order + centroids_, [row](CodeElement a, CodeElement b) {
            return row[a] < row[b] || (row[a] == row[b] && a < b);
        });
        for (std::size_t pos = 0; pos < centroids_; ++pos) {
            rank_[m * centroids_ + order[pos]] = static_cast<CodeElement>(pos);
        }
    }
    sorted_ = true;
}

DistanceTuple DistanceMatrix::at_rank(std::size_t m, std::size_t pos) const {
    PQTABLE_CHECK(sorted_, invalid_argument, "distance matrix rows are not sorted");
    PQTABLE_CHECK(m < subspaces_ && pos < centroids_, out_of_range, "distance matrix index");
    const CodeElement k = order_[m * centroids_ + pos];
    return {k, dist_[m * centroids_ + k], pos};
}

DistanceTuple DistanceMatrix::at_index(std::size_t m, std::size_t k) const {
    PQTABLE_CHECK(m < subspaces_ && k < centroids_, out_of_range, "distance matrix index");
    return {static_cast<CodeElement>(k), dist_[m * centroids_ + k],
            sorted_ ? std::size_t{rank_[m * centroids_ + k]} : std::size_t{0}};
}

DistanceMatrix DistanceMatrix::slice(std::size_t first, std::size_t count) const {
    PQTABLE_CHECK(first + count <= subspaces_, out_of_range, "distance matrix slice");
    DistanceMatrix out(count, centroids_);
    std::copy_n(dist_.begin() + static_cast<std::ptrdiff_t>(first * centroids_),
                count * centroids_, out.dist_.begin());
    return out;
}

// ---------------------------------------------------------------------------
// Training

namespace {

std::size_t random_below(std::mt19937_64& rng, std::size_t n) {
    // Rejection sampling keeps the draw identical across standard libraries.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return static_cast<std::size_t>(v % n);
}

struct SubspaceData {
    std::vector<float> values;  // n x ds
    std::size_t n = 0;
    std::size_t ds = 0;

    std::span<const float> row(std::size_t i) const { return {values.data() + i * ds, ds}; }
};

SubspaceData extract_subspace(FloatView data, std::size_t m, std::size_t ds) {
    SubspaceData sub{std::vector<float>(data.rows * ds), data.rows, ds};
    for (std::size_t i = 0; i < data.rows; ++i) {
        std::memcpy(sub.values.data() + i * ds, data.data + i * data.cols + m * ds,
                    ds * sizeof(float));
    }
    return sub;
}

std::size_t nearest(std::span<const float> x, const float* centroids, std::size_t k,
                    std::size_t ds, double* best_dist) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_l2(x, {centroids + c * ds, ds});
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (best_dist != nullptr) {
        *best_dist = best_d;
    }
    return best;
}

std::vector<float> sample_distinct(const SubspaceData& sub, std::size_t k, std::mt19937_64& rng) {
    std::vector<std::size_t> perm(sub.n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = sub.n; i > 1; --i) {
        std::swap(perm[i - 1], perm[random_below(rng, i)]);
    }

    std::vector<float> centroids;
    centroids.reserve(k * sub.ds);
    std::unordered_set<std::string> seen;
    std::vector<std::size_t> rejected;
    for (std::size_t idx : perm) {
        if (centroids.size() == k * sub.ds) {
            break;
        }
        const auto row = sub.row(idx);
        std::string key(reinterpret_cast<const char*>(row.data()), row.size_bytes());
        if (seen.insert(std::move(key)).second) {
            centroids.insert(centroids.end(), row.begin(), row.end());
        } else if (rejected.size() < k) {
            rejected.push_back(idx);
        }
    }
    // Fewer distinct sub-vectors than K: pad with duplicates.
    for (std::size_t i = 0; centroids.size() < k * sub.ds; ++i) {
        const auto row = sub.row(rejected[i % rejected.size()]);
        centroids.insert(centroids.end(), row.begin(), row.end());
    }
    return centroids;
}

// Lloyd iterations. trace[i] += objective of assignment step i.
void lloyd(const SubspaceData& sub, std::size_t k, std::size_t iterations,
           std::vector<float>& centroids, std::vector<double>* trace) {
    const std::size_t ds = sub.ds;
    std::vector<std::size_t> assign(sub.n);
    std::vector<double> point_dist(sub.n);
    std::vector<double> sums(k * ds);
    std::vector<std::size_t> counts(k);

    for (std::size_t it = 0; it < iterations; ++it) {
        double objective = 0.0;
        for (std::size_t i = 0; i < sub.n; ++i) {
            assign[i] = nearest(sub.row(i), centroids.data(), k, ds, &point_dist[i]);
            objective += point_dist[i];
        }
        if (trace != nullptr) {
            (*trace)[it] += objective;
        }

        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < sub.n; ++i) {
            const auto row = sub.row(i);
            double* s = sums.data() + assign[i] * ds;
            for (std::size_t d = 0; d < ds; ++d) {
                s[d] += row[d];
            }
            ++counts[assign[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                continue;
            }
            for (std::size_t d = 0; d < ds; ++d) {
                centroids[c * ds + d] =
                        static_cast<float>(sums[c * ds + d] / static_cast<double>(counts[c]));
            }
        }

        // Empty clusters are moved onto the points farthest from their centroids.
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) {
                continue;
            }
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < sub.n; ++i) {
                if (point_dist[i] > far_d) {
                    far_d = point_dist[i];
                    far = i;
                }
            }
            const auto row = sub.row(far);
            std::copy(row.begin(), row.end(), centroids.begin() + static_cast<std::ptrdiff_t>(c * ds));
            point_dist[far] = -1.0;
        }
    }
}

void validate_training(FloatView data, const TrainParams& params) {
    PQTABLE_CHECK(params.subspaces > 0 && params.centroids > 0, invalid_argument,
                  "M and K must be positive");
    PQTABLE_CHECK(params.centroids <= 65536, invalid_argument, "K must be at most 65536");
    PQTABLE_CHECK(params.iterations >= 1, invalid_argument, "at least one k-means iteration");
    PQTABLE_CHECK(data.cols > 0 && data.cols % params.subspaces == 0, dimension_mismatch,
                  "dimension-not-divisible: D must be a multiple of M");
    PQTABLE_CHECK(data.rows >= params.centroids, insufficient_data,
                  "insufficient-training-data: fewer training vectors than K");
}

Codebook train_impl(FloatView data, const TrainParams& params, const Codebook* init,
                    std::vector<double>* trace) {
    validate_training(data, params);
    const std::size_t ds = data.cols / params.subspaces;
    const std::size_t k = params.centroids;
    if (trace != nullptr) {
        trace->assign(params.iterations, 0.0);
    }

    std::vector<float> codewords(params.subspaces * k * ds);
    for (std::size_t m = 0; m < params.subspaces; ++m) {
        const SubspaceData sub = extract_subspace(data, m, ds);
        std::vector<float> centroids;
        if (init != nullptr) {
            const auto all = init->codewords();
            centroids.assign(all.begin() + static_cast<std::ptrdiff_t>(m * k * ds),
                             all.begin() + static_cast<std::ptrdiff_t>((m + 1) * k * ds));
        } else {
            std::mt19937_64 rng(params.seed + 0x9e3779b97f4a7c15ULL * (m + 1));
            centroids = sample_distinct(sub, k, rng);
        }
        lloyd(sub, k, params.iterations, centroids, trace);
        std::copy(centroids.begin(), centroids.end(),
                  codewords.begin() + static_cast<std::ptrdiff_t>(m * k * ds));
    }
    return Codebook(data.cols, params.subspaces, k, std::move(codewords));
}

}  // namespace

Codebook train_codebook(FloatView data, const TrainParams& params, std::vector<double>* trace) {
    return train_impl(data, params, nullptr, trace);
}

Codebook train_codebook(FloatView data, const TrainParams& params, const Codebook& init,
                        std::vector<double>* trace) {
    PQTABLE_CHECK(init.dim() == data.cols && init.subspaces() == params.subspaces &&
                          init.centroids() == params.centroids,
                  invalid_argument, "initial codebook shape differs from training parameters");
    return train_impl(data, params, &init, trace);
}

// ---------------------------------------------------------------------------
// Encoding and distances

void encode_into(std::span<const float> x, const Codebook& cb, std::span<CodeElement> out) {
    PQTABLE_CHECK(x.size() == cb.dim(), dimension_mismatch, "vector dimension differs from D");
    PQTABLE_CHECK(out.size() == cb.subspaces(), dimension_mismatch, "code buffer length differs from M");
    const std::size_t ds = cb.subdim();
    for (std::size_t m = 0; m < cb.subspaces(); ++m) {
        out[m] = static_cast<CodeElement>(
                nearest(x.subspan(m * ds, ds), cb.codeword(m, 0).data(), cb.centroids(), ds, nullptr));
    }
}

PQCode encode(std::span<const float> x, const Codebook& cb) {
    PQCode code(cb.subspaces());
    encode_into(x, cb, code);
    return code;
}

CodeArray encode_all(FloatView data, const Codebook& cb) {
    PQTABLE_CHECK(data.rows == 0 || data.cols == cb.dim(), dimension_mismatch,
                  "data dimension differs from codebook D");
    CodeArray codes(cb.subspaces(), cb.centroids());
    codes.reserve(data.rows);
    PQCode code(cb.subspaces());
    for (std::size_t i = 0; i < data.rows; ++i) {
        encode_into(data.row(i), cb, code);
        codes.push_back(code);
    }
    return codes;
}

std::vector<float> decode(std::span<const CodeElement> code, const Codebook& cb) {
    PQTABLE_CHECK(code.size() == cb.subspaces(), dimension_mismatch, "code length differs from M");
    std::vector<float> out;
    out.reserve(cb.dim());
    for (std::size_t m = 0; m < code.size(); ++m) {
        PQTABLE_CHECK(code[m] < cb.centroids(), out_of_range, "code element exceeds K");
        const auto cw = cb.codeword(m, code[m]);
        out.insert(out.end(), cw.begin(), cw.end());
    }
    return out;
}

double quantization_error(FloatView data, const Codebook& cb) {
    if (data.rows == 0) {
        return 0.0;
    }
    PQTABLE_CHECK(data.cols == cb.dim(), dimension_mismatch, "data dimension differs from codebook D");
    PQCode code(cb.subspaces());
    double total = 0.0;
    for (std::size_t i = 0; i < data.rows; ++i) {
        encode_into(data.row(i), cb, code);
        total += squared_l2(data.row(i), decode(code, cb));
    }
    return total / static_cast<double>(data.rows);
}

DistanceMatrix build_distance_matrix(std::span<const float> q, const Codebook& cb, bool sort) {
    PQTABLE_CHECK(q.size() == cb.dim(), dimension_mismatch, "query dimension differs from D");
    DistanceMatrix dm(cb.subspaces(), cb.centroids());
    const std::size_t ds = cb.subdim();
    for (std::size_t m = 0; m < cb.subspaces(); ++m) {
        const auto qm = q.subspan(m * ds, ds);
        for (std::size_t k = 0; k < cb.centroids(); ++k) {
            dm.set_distance(m, k, squared_l2(qm, cb.codeword(m, k)));
        }
    }
    if (sort) {
        dm.sort_rows();
    }
    return dm;
}

double adc_distance(const DistanceMatrix& dm, std::span<const CodeElement> code) {
    PQTABLE_CHECK(code.size() == dm.subspaces(), dimension_mismatch, "code length differs from M");
    for (CodeElement e : code) {
        PQTABLE_CHECK(e < dm.centroids(), out_of_range, "code element exceeds K");
    }
    return adc_distance_unchecked(dm, code);
}

double adc_distance(const DistanceMatrix& dm, const CodeArray& codes, std::size_t n) noexcept {
    const double* d = dm.data();
    const std::size_t k = dm.centroids();
    double acc = 0.0;
    for (std::size_t m = 0; m < codes.subspaces(); ++m) {
        acc += d[m * k + codes.at(n, m)];
    }
    return acc;
}

namespace {

// Keeps the `topk` smallest scores seen so far; max-heap on (dist, id).
class TopK {
public:
    explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k); }

    void push(Score s) {
        if (heap_.size() < k_) {
            heap_.push_back(s);
            std::push_heap(heap_.begin(), heap_.end());
        } else if (s < heap_.front()) {
            std::pop_heap(heap_.begin(), heap_.end());
            heap_.back() = s;
            std::push_heap(heap_.begin(), heap_.end());
        }
    }

    std::vector<Score> take_sorted() {
        std::sort_heap(heap_.begin(), heap_.end());
        return std::move(heap_);
    }

private:
    std::size_t k_;
    std::vector<Score> heap_;
};

}  // namespace

std::vector<Score> linear_adc_scan(const DistanceMatrix& dm, const CodeArray& codes,
                                   std::size_t topk) {
    PQTABLE_CHECK(topk >= 1, invalid_argument, "L must be at least 1");
    PQTABLE_CHECK(!codes.empty(), empty_database, "empty-database: no codes to scan");
    PQTABLE_CHECK(codes.subspaces() == dm.subspaces(), dimension_mismatch,
                  "codes and distance matrix disagree on M");
    const std::size_t n = codes.size();
    if (topk == 1) {
        Score best{0, adc_distance(dm, codes, 0)};
        for (std::size_t i = 1; i < n; ++i) {
            const double d = adc_distance(dm, codes, i);
            if (d < best.dist) {
                best = {static_cast<RecordId>(i), d};
            }
        }
        return {best};
    }
    TopK top(std::min(topk, n));
    for (std::size_t i = 0; i < n; ++i) {
        top.push({static_cast<RecordId>(i), adc_distance(dm, codes, i)});
    }
    return top.take_sorted();
}

std::vector<Score> linear_adc_scan(std::span<const float> q, const CodeArray& codes,
                                   const Codebook& cb, std::size_t topk) {
    PQTABLE_CHECK(codes.subspaces() == cb.subspaces(), dimension_mismatch,
                  "codes were not produced by this codebook");
    return linear_adc_scan(build_distance_matrix(q, cb), codes, topk);
}

std::vector<Score> linear_adc_scan(std::span<const float> q, std::span<const PQCode> codes,
                                   const Codebook& cb, std::size_t topk) {
    CodeArray packed(cb.subspaces(), cb.centroids());
    packed.reserve(codes.size());
    for (const auto& c : codes) {
        packed.push_back(c);
    }
    return linear_adc_scan(q, packed, cb, topk);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {
constexpr std::uint32_t kCodebookVersion = 1;
}

void write_codebook(std::ostream& out, const Codebook& cb) {
    detail::write_magic(out, "PQCB");
    detail::write_u32(out, kCodebookVersion);
    detail::write_u32(out, static_cast<std::uint32_t>(cb.dim()));
    detail::write_u32(out, static_cast<std::uint32_t>(cb.subspaces()));
    detail::write_u32(out, static_cast<std::uint32_t>(cb.centroids()));
    detail::write_f32_array(out, cb.codewords());
}

Codebook read_codebook(std::istream& in) {
    detail::expect_magic(in, "PQCB");
    const std::uint32_t version = detail::read_u32(in, "codebook version");
    PQTABLE_CHECK(version == kCodebookVersion, format,
                  "unsupported codebook version " + std::to_string(version));
    const std::uint32_t dim = detail::read_u32(in, "codebook D");
    const std::uint32_t m = detail::read_u32(in, "codebook M");
    const std::uint32_t k = detail::read_u32(in, "codebook K");
    PQTABLE_CHECK(m > 0 && k > 0 && dim > 0 && dim % m == 0 && k <= 65536, format,
                  "inconsistent codebook header");
    auto values = detail::read_f32_array(in, static_cast<std::size_t>(dim) * k, "codewords");
    return Codebook(dim, m, k, std::move(values));
}

}  // namespace pqtable
