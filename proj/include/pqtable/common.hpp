#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pqtable {

/// Index of a sub-codeword inside one sub-codebook. Zero-based.
using CodeElement = std::uint16_t;

/// A full (or partial) PQ code: one sub-codeword index per subspace.
using PQCode = std::vector<CodeElement>;

/// Record identifier. Zero-based position of the record in insertion order.
using RecordId = std::uint32_t;

enum class ErrorCode {
    invalid_argument,
    dimension_mismatch,
    insufficient_data,
    out_of_range,
    exhausted,
    empty_database,
    io,
    format,
    internal,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
            : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

#define PQTABLE_THROW(code, msg) throw ::pqtable::Error(::pqtable::ErrorCode::code, (msg))

#define PQTABLE_CHECK(cond, code, msg) \
    do {                               \
        if (!(cond)) {                 \
            PQTABLE_THROW(code, msg);  \
        }                              \
    } while (false)

/// (identifier, asymmetric squared distance). Orders by distance, then id.
struct Score {
    RecordId id = 0;
    double dist = 0.0;

    friend bool operator<(const Score& a, const Score& b) noexcept {
        return a.dist < b.dist || (a.dist == b.dist && a.id < b.id);
    }
    friend bool operator==(const Score& a, const Score& b) noexcept = default;
};

/// Non-owning row-major view of `rows` vectors of dimension `cols`.
template <class T>
struct MatrixView {
    const T* data = nullptr;
    std::size_t rows = 0;
    std::size_t cols = 0;

    MatrixView() = default;
    MatrixView(const T* d, std::size_t r, std::size_t c) : data(d), rows(r), cols(c) {}

    std::span<const T> row(std::size_t i) const { return {data + i * cols, cols}; }

    /// First `n` rows.
    MatrixView prefix(std::size_t n) const { return {data, n < rows ? n : rows, cols}; }
};

/// Owning row-major matrix.
template <class T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<T> values)
            : rows_(rows), cols_(cols), data_(std::move(values)) {
        if (data_.size() != rows_ * cols_) {
            PQTABLE_THROW(invalid_argument, "matrix storage does not match its shape");
        }
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return rows_ == 0; }

    std::span<T> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const T> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    const std::vector<T>& values() const noexcept { return data_; }

    MatrixView<T> view() const { return {data_.data(), rows_, cols_}; }
    operator MatrixView<T>() const { return view(); }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using FloatMatrix = Matrix<float>;
using FloatView = MatrixView<float>;

/// Squared Euclidean distance accumulated in double precision.
inline double squared_l2(std::span<const float> a, std::span<const float> b) noexcept {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += diff * diff;
    }
    return acc;
}

}  // namespace pqtable
