#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bagf/error.hpp"

namespace bagf {

// Row-major matrix of embedding vectors: one row per token, patch or bag.
// All in-memory values are 64-bit; on-disk files are 32-bit (see io.hpp).
struct EmbeddingMatrix {
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<double> data;   // rows * dim, row-major
    bool normalized = false;    // every row has unit L2 norm (within 1e-6)

    EmbeddingMatrix() = default;
    EmbeddingMatrix(std::size_t rows_, std::size_t dim_)
        : rows(rows_), dim(dim_), data(rows_ * dim_, 0.0) {}

    std::span<const double> row(std::size_t r) const {
        return {data.data() + r * dim, dim};
    }
    std::span<double> row(std::size_t r) {
        return {data.data() + r * dim, dim};
    }
    double at(std::size_t r, std::size_t c) const { return data[r * dim + c]; }
    double& at(std::size_t r, std::size_t c) { return data[r * dim + c]; }
};

// Bias-free linear map into the joint multimodal space.
struct ProjectionHead {
    std::size_t dim_in = 0;
    std::size_t dim_out = 0;
    std::vector<double> weight;   // dim_in * dim_out, row-major

    static ProjectionHead identity(std::size_t dim);
    static ProjectionHead random(std::size_t dim_in, std::size_t dim_out,
                                 std::uint64_t seed);
};

// Seeded square linear map applied row-wise; stands in for a frozen sequence
// encoder so that the early/late bagging order is exercisable.
struct LinearMixer {
    std::size_t dim = 0;
    std::uint64_t seed = 0;
    std::vector<double> weight;   // dim * dim, row-major

    static LinearMixer identity(std::size_t dim);
    static LinearMixer random(std::size_t dim, std::uint64_t seed);
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// Scales v to unit norm. ZeroRow if the norm is below 1e-12.
std::vector<double> l2_normalized(std::span<const double> v);

// Row-wise L2 normalization. ZeroRow(row) if any row norm is below 1e-12.
EmbeddingMatrix l2_normalize_rows(const EmbeddingMatrix& m);

// Right-multiplies every row by the head weight. Result is not normalized;
// callers normalize explicitly. DimMismatch if m.dim != head.dim_in.
EmbeddingMatrix project(const EmbeddingMatrix& m, const ProjectionHead& head);

// Right-multiplies every row by the mixer weight. DimMismatch on dim.
EmbeddingMatrix mix(const EmbeddingMatrix& m, const LinearMixer& mixer);

} // namespace bagf
