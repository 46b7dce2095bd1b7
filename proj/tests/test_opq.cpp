#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "pqtable/opq.hpp"

using namespace pqtable;

namespace {

// Axis-aligned product structure (each coordinate is a two-point mixture with
// its own scale) hidden behind a known rotation.
FloatMatrix anisotropic(std::size_t n, std::size_t dim, const Rotation& hide, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> noise(0.0f, 0.1f);
    FloatMatrix raw(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            const float scale = 0.5f + static_cast<float>(j % 5);
            raw.row(i)[j] = ((rng() & 1) ? scale : -scale) + noise(rng);
        }
    }
    return rotate_all(hide, raw.view());
}

}  // namespace

TEST(Rotation, IdentityAndRandomAreOrthogonal) {
    EXPECT_EQ(Rotation::identity(8).orthogonality_error(), 0.0);
    const Rotation r = Rotation::random(16, 3);
    EXPECT_LT(r.orthogonality_error(), 1e-5);
    EXPECT_EQ(r, Rotation::random(16, 3));
    EXPECT_NE(r, Rotation::random(16, 4));
}

TEST(Rotation, RotateIsMatrixVectorProduct) {
    const Rotation r = Rotation::random(5, 7);
    const std::vector<float> x{1.0f, -2.0f, 0.5f, 3.0f, 0.0f};
    const auto y = rotate(r, x);
    for (std::size_t i = 0; i < 5; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < 5; ++j) {
            acc += static_cast<double>(r.at(i, j)) * x[j];
        }
        EXPECT_NEAR(y[i], acc, 1e-5);
    }
    // Norm is preserved.
    EXPECT_NEAR(squared_l2(y, std::vector<float>(5, 0.0f)), squared_l2(x, std::vector<float>(5, 0.0f)), 1e-4);
    EXPECT_EQ(rotate(Rotation::identity(5), x), x);
}

TEST(Rotation, Errors) {
    EXPECT_THROW(Rotation(3, std::vector<float>(8)), Error);
    try {
        rotate(Rotation::identity(4), std::vector<float>(3));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::dimension_mismatch);
    }
}

TEST(Rotation, FileRoundTrip) {
    const Rotation r = Rotation::random(6, 11);
    std::stringstream buf;
    write_rotation(buf, r);
    EXPECT_EQ(buf.str().substr(0, 4), "OPQR");
    EXPECT_EQ(read_rotation(buf), r);

    std::stringstream bad("OPQX\x06\0\0\0");
    EXPECT_THROW(read_rotation(bad), Error);
    std::stringstream cut(std::string("OPQR\x06\0\0\0", 8) + std::string(10, '\0'));
    try {
        read_rotation(cut);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::format);
    }
}

TEST(TrainRotation, ErrorNeverIncreasesAndStaysOrthogonal) {
    const FloatMatrix data = anisotropic(3000, 16, Rotation::random(16, 1), 2);
    OpqParams params;
    params.pq = {4, 16, 10, 5};
    params.outer_iterations = 6;
    const OpqResult res = train_rotation(data.view(), params);
    ASSERT_EQ(res.error_trace.size(), 6u);
    for (std::size_t i = 1; i < res.error_trace.size(); ++i) {
        EXPECT_LE(res.error_trace[i], res.error_trace[i - 1] * (1.0 + 1e-6));
    }
    EXPECT_LT(res.rotation.orthogonality_error(), 1e-4);
    // The last trace entry is the error of the returned pair.
    const FloatMatrix rotated = rotate_all(res.rotation, data.view());
    EXPECT_NEAR(quantization_error(rotated.view(), res.codebook), res.error_trace.back(),
                1e-4 * res.error_trace.back());
}

TEST(TrainRotation, BeatsPlainPqOnRotatedProductData) {
    double pq_total = 0.0;
    double opq_total = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const FloatMatrix data = anisotropic(2000, 16, Rotation::random(16, 100 + seed), seed);
        const TrainParams pq{4, 16, 10, seed};
        pq_total += quantization_error(data.view(), train_codebook(data.view(), pq));
        OpqParams params;
        params.pq = pq;
        params.outer_iterations = 8;
        opq_total += train_rotation(data.view(), params).error_trace.back();
    }
    EXPECT_LE(opq_total, pq_total);
}

TEST(TrainRotation, OneRoundWithIdentityIsPlainPq) {
    const FloatMatrix data = anisotropic(1000, 8, Rotation::identity(8), 3);
    OpqParams params;
    params.pq = {2, 8, 6, 9};
    params.outer_iterations = 1;
    const OpqResult res = train_rotation(data.view(), params);
    EXPECT_EQ(res.rotation, Rotation::identity(8));
    EXPECT_EQ(res.codebook, train_codebook(data.view(), params.pq));
}

TEST(TrainRotation, Errors) {
    const FloatMatrix data = anisotropic(100, 6, Rotation::identity(6), 4);
    OpqParams params;
    params.pq = {4, 4, 2, 1};
    try {
        train_rotation(data.view(), params);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::dimension_mismatch);
    }
    params.pq.subspaces = 3;
    params.outer_iterations = 0;
    EXPECT_THROW(train_rotation(data.view(), params), Error);
}
