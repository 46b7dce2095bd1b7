#pragma once

// Optimized product quantization: an orthogonal rotation applied before PQ.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "pqtable/common.hpp"
#include "pqtable/quantizer.hpp"

namespace pqtable {

/// D x D orthogonal matrix, row-major float storage.
class Rotation {
public:
    Rotation() = default;
    Rotation(std::size_t dim, std::vector<float> values);

    static Rotation identity(std::size_t dim);
    /// Haar-distributed random orthogonal matrix.
    static Rotation random(std::size_t dim, std::uint64_t seed);

    std::size_t dim() const noexcept { return dim_; }
    std::span<const float> values() const noexcept { return values_; }
    float at(std::size_t r, std::size_t c) const noexcept { return values_[r * dim_ + c]; }

    /// max |R^T R - I|.
    double orthogonality_error() const;

    friend bool operator==(const Rotation&, const Rotation&) = default;

private:
    std::size_t dim_ = 0;
    std::vector<float> values_;
};

/// R x, accumulated in double.
std::vector<float> rotate(const Rotation& r, std::span<const float> x);
void rotate_into(const Rotation& r, std::span<const float> x, std::span<float> out);
FloatMatrix rotate_all(const Rotation& r, FloatView data);

struct OpqParams {
    TrainParams pq;
    std::size_t outer_iterations = 10;
    bool random_init = false;  // identity start unless set; seeded by pq.seed
};

struct OpqResult {
    Rotation rotation;
    Codebook codebook;
    /// Mean squared quantization error of the rotated data after each
    /// alternation (codebook step followed by re-encoding).
    std::vector<double> error_trace;
};

/// Alternates PQ training on rotated data with an orthogonal Procrustes
/// update of the rotation. Codebooks are warm-started between rounds, so the
/// recorded error never increases.
OpqResult train_rotation(FloatView data, const OpqParams& params);

void write_rotation(std::ostream& out, const Rotation& r);
Rotation read_rotation(std::istream& in);

}  // namespace pqtable
