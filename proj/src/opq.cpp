#include "pqtable/opq.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <random>

#include "binary_io.hpp"

namespace pqtable {

namespace {

using MatrixXdRow = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Rotation from_eigen(const Eigen::MatrixXd& m) {
    const auto d = static_cast<std::size_t>(m.rows());
    std::vector<float> values(d * d);
    for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            values[r * d + c] = static_cast<float>(m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
        }
    }
    return Rotation(d, std::move(values));
}

}  // namespace

Rotation::Rotation(std::size_t dim, std::vector<float> values) : dim_(dim), values_(std::move(values)) {
    PQTABLE_CHECK(values_.size() == dim_ * dim_, invalid_argument, "rotation storage is not D x D");
}

Rotation Rotation::identity(std::size_t dim) {
    std::vector<float> values(dim * dim, 0.0f);
    for (std::size_t i = 0; i < dim; ++i) {
        values[i * dim + i] = 1.0f;
    }
    return Rotation(dim, std::move(values));
}

Rotation Rotation::random(std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd g(dim, dim);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
        for (Eigen::Index c = 0; c < g.cols(); ++c) {
            g(r, c) = gauss(rng);
        }
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd rr = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index c = 0; c < q.cols(); ++c) {
        if (rr(c, c) < 0) {
            q.col(c) *= -1.0;
        }
    }
    return from_eigen(q);
}

double Rotation::orthogonality_error() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
        for (std::size_t j = 0; j < dim_; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < dim_; ++k) {
                dot += static_cast<double>(at(k, i)) * at(k, j);
            }
            worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
        }
    }
    return worst;
}

void rotate_into(const Rotation& r, std::span<const float> x, std::span<float> out) {
    PQTABLE_CHECK(x.size() == r.dim() && out.size() == r.dim(), dimension_mismatch,
                  "vector dimension differs from rotation D");
    const std::size_t d = r.dim();
    const float* m = r.values().data();
    for (std::size_t i = 0; i < d; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            acc += static_cast<double>(m[i * d + j]) * x[j];
        }
        out[i] = static_cast<float>(acc);
    }
}

std::vector<float> rotate(const Rotation& r, std::span<const float> x) {
    std::vector<float> out(r.dim());
    rotate_into(r, x, out);
    return out;
}

FloatMatrix rotate_all(const Rotation& r, FloatView data) {
    PQTABLE_CHECK(data.rows == 0 || data.cols == r.dim(), dimension_mismatch,
                  "data dimension differs from rotation D");
    FloatMatrix out(data.rows, r.dim());
    for (std::size_t i = 0; i < data.rows; ++i) {
        rotate_into(r, data.row(i), out.row(i));
    }
    return out;
}

OpqResult train_rotation(FloatView data, const OpqParams& params) {
    PQTABLE_CHECK(params.outer_iterations >= 1, invalid_argument, "at least one OPQ alternation");
    PQTABLE_CHECK(data.cols > 0 && data.cols % params.pq.subspaces == 0, dimension_mismatch,
                  "dimension-not-divisible: D must be a multiple of M");
    const std::size_t d = data.cols;
    const std::size_t n = data.rows;

    OpqResult result;
    result.rotation = params.random_init ? Rotation::random(d, params.pq.seed) : Rotation::identity(d);

    MatrixXdRow x(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data.data[i * d + j];
        }
    }

    PQCode code(params.pq.subspaces);
    for (std::size_t round = 0; round < params.outer_iterations; ++round) {
        const FloatMatrix rotated = rotate_all(result.rotation, data);
        result.codebook = round == 0
                                  ? train_codebook(rotated.view(), params.pq)
                                  : train_codebook(rotated.view(), params.pq, result.codebook);

        // Reconstructions in the rotated space, and the error of this round.
        MatrixXdRow recon(n, d);
        double error = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            encode_into(rotated.row(i), result.codebook, code);
            const auto y = decode(code, result.codebook);
            error += squared_l2(rotated.row(i), y);
            for (std::size_t j = 0; j < d; ++j) {
                recon(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = y[j];
            }
        }
        result.error_trace.push_back(n == 0 ? 0.0 : error / static_cast<double>(n));

        if (round + 1 == params.outer_iterations) {
            break;
        }
        // argmin over orthogonal R of ||R x_i - y_i||^2: R = U V^T for
        // sum_i y_i x_i^T = U S V^T.
        const Eigen::MatrixXd cross = recon.transpose() * x;
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
        result.rotation = from_eigen(svd.matrixU() * svd.matrixV().transpose());
    }
    return result;
}

void write_rotation(std::ostream& out, const Rotation& r) {
    detail::write_magic(out, "OPQR");
    detail::write_u32(out, static_cast<std::uint32_t>(r.dim()));
    detail::write_f32_array(out, r.values());
}

Rotation read_rotation(std::istream& in) {
    detail::expect_magic(in, "OPQR");
    const std::uint32_t d = detail::read_u32(in, "rotation D");
    PQTABLE_CHECK(d > 0 && d <= 65536, format, "rotation dimension out of range");
    auto values = detail::read_f32_array(in, static_cast<std::size_t>(d) * d, "rotation");
    return Rotation(d, std::move(values));
}

}  // namespace pqtable
