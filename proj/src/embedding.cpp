#include "bagf/embedding.hpp"

#include <cmath>
#include <random>
#include <string>

namespace bagf {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::ZeroRow: return "ZeroRow";
        case ErrorCode::DimMismatch: return "DimMismatch";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::NotNormalized: return "NotNormalized";
        case ErrorCode::EmptyVocabulary: return "EmptyVocabulary";
        case ErrorCode::DuplicateEntry: return "DuplicateEntry";
        case ErrorCode::TokenOutOfRange: return "TokenOutOfRange";
        case ErrorCode::CoverageMismatch: return "CoverageMismatch";
        case ErrorCode::EmptyMask: return "EmptyMask";
        case ErrorCode::GridMismatch: return "GridMismatch";
        case ErrorCode::NonSquare: return "NonSquare";
        case ErrorCode::NonPositiveTau: return "NonPositiveTau";
        case ErrorCode::DivergenceDetected: return "DivergenceDetected";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::UnsupportedMode: return "UnsupportedMode";
        case ErrorCode::MissingLateMatrix: return "MissingLateMatrix";
        case ErrorCode::MissingQrel: return "MissingQrel";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::FormatError: return "FormatError";
    }
    return "Unknown";
}

namespace {

constexpr double kZeroNormThreshold = 1e-12;

std::vector<double> random_weight(std::size_t rows, std::size_t cols,
                                  std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
    std::vector<double> w(rows * cols);
    for (double& x : w) x = gauss(rng) * scale;
    return w;
}

std::vector<double> identity_weight(std::size_t dim) {
    std::vector<double> w(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) w[i * dim + i] = 1.0;
    return w;
}

// out[r,:] = m[r,:] * weight, weight is (m.dim x dim_out) row-major.
EmbeddingMatrix right_multiply(const EmbeddingMatrix& m,
                               const std::vector<double>& weight,
                               std::size_t dim_out) {
    EmbeddingMatrix out(m.rows, dim_out);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* in = m.data.data() + r * m.dim;
        double* o = out.data.data() + r * dim_out;
        for (std::size_t i = 0; i < m.dim; ++i) {
            const double v = in[i];
            if (v == 0.0) continue;
            const double* wrow = weight.data() + i * dim_out;
            for (std::size_t j = 0; j < dim_out; ++j) o[j] += v * wrow[j];
        }
    }
    return out;
}

} // namespace

ProjectionHead ProjectionHead::identity(std::size_t dim) {
    return ProjectionHead{dim, dim, identity_weight(dim)};
}

ProjectionHead ProjectionHead::random(std::size_t dim_in, std::size_t dim_out,
                                      std::uint64_t seed) {
    return ProjectionHead{dim_in, dim_out, random_weight(dim_in, dim_out, seed)};
}

LinearMixer LinearMixer::identity(std::size_t dim) {
    return LinearMixer{dim, 0, identity_weight(dim)};
}

LinearMixer LinearMixer::random(std::size_t dim, std::uint64_t seed) {
    return LinearMixer{dim, seed, random_weight(dim, dim, seed)};
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        raise(ErrorCode::DimMismatch,
              "dot: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

std::vector<double> l2_normalized(std::span<const double> v) {
    const double n = l2_norm(v);
    if (n < kZeroNormThreshold)
        raise(ErrorCode::ZeroRow, "cannot normalize a zero vector");
    std::vector<double> out(v.begin(), v.end());
    for (double& x : out) x /= n;
    return out;
}

EmbeddingMatrix l2_normalize_rows(const EmbeddingMatrix& m) {
    EmbeddingMatrix out = m;
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double n = l2_norm(m.row(r));
        if (n < kZeroNormThreshold)
            raise(ErrorCode::ZeroRow, "row " + std::to_string(r) + " has zero norm");
        for (std::size_t c = 0; c < m.dim; ++c) out.at(r, c) = m.at(r, c) / n;
    }
    out.normalized = true;
    return out;
}

EmbeddingMatrix project(const EmbeddingMatrix& m, const ProjectionHead& head) {
    if (m.dim != head.dim_in)
        raise(ErrorCode::DimMismatch,
              "project: input dim " + std::to_string(m.dim) + " vs head dim_in " +
                  std::to_string(head.dim_in));
    return right_multiply(m, head.weight, head.dim_out);
}

EmbeddingMatrix mix(const EmbeddingMatrix& m, const LinearMixer& mixer) {
    if (m.dim != mixer.dim)
        raise(ErrorCode::DimMismatch,
              "mix: input dim " + std::to_string(m.dim) + " vs mixer dim " +
                  std::to_string(mixer.dim));
    return right_multiply(m, mixer.weight, mixer.dim);
}

} // namespace bagf
