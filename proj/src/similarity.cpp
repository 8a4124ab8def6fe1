#include "bagf/similarity.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace bagf {

const char* to_string(ScoringMode mode) {
    switch (mode) {
        case ScoringMode::Global: return "global";
        case ScoringMode::TokenWise: return "tokenwise";
        case ScoringMode::BagWise: return "bagwise";
    }
    return "unknown";
}

ScoringMode scoring_mode_from_string(std::string_view s) {
    if (s == "global") return ScoringMode::Global;
    if (s == "tokenwise") return ScoringMode::TokenWise;
    if (s == "bagwise") return ScoringMode::BagWise;
    raise(ErrorCode::FormatError, "unknown scoring mode: " + std::string(s));
}

const char* to_string(Direction d) {
    return d == Direction::ImageToText ? "i2t" : "t2i";
}

Direction direction_from_string(std::string_view s) {
    if (s == "i2t") return Direction::ImageToText;
    if (s == "t2i") return Direction::TextToImage;
    raise(ErrorCode::FormatError, "unknown direction: " + std::string(s));
}

namespace {

constexpr double kNormTolerance = 1e-6;

void check_unit(std::span<const double> v, const char* side) {
    if (std::abs(l2_norm(v) - 1.0) > kNormTolerance)
        raise(ErrorCode::NotNormalized,
              std::string(side) + " vector is not L2-normalized");
}

// Shared mean-over-queries / max-over-valid-candidates kernel. Both MaxSim
// directions reduce to this with the roles of the two sides swapped.
double mean_max_similarity(const EmbeddingMatrix& lhs,
                           const EmbeddingMatrix& rhs,
                           const PaddingMask& mask) {
    if (lhs.dim != rhs.dim)
        raise(ErrorCode::DimMismatch,
              "embedding dims differ: " + std::to_string(lhs.dim) + " vs " +
                  std::to_string(rhs.dim));
    if (mask.size() != rhs.rows)
        raise(ErrorCode::DimMismatch,
              "mask covers " + std::to_string(mask.size()) + " rows, matrix has " +
                  std::to_string(rhs.rows));
    if (lhs.rows == 0)
        raise(ErrorCode::EmptyInput, "no rows to average over");
    if (mask.valid_count() == 0)
        raise(ErrorCode::EmptyMask, "every candidate row is masked out");

    const std::size_t d = lhs.dim;
    double total = 0.0;
    for (std::size_t i = 0; i < lhs.rows; ++i) {
        const double* a = lhs.data.data() + i * d;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < rhs.rows; ++j) {
            if (!mask.is_valid(j)) continue;
            const double* b = rhs.data.data() + j * d;
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) s += a[c] * b[c];
            if (s > best) best = s;
        }
        total += best;
    }
    return total / static_cast<double>(lhs.rows);
}

} // namespace

double global_similarity(std::span<const double> img_cls,
                         std::span<const double> txt_cls) {
    if (img_cls.size() != txt_cls.size())
        raise(ErrorCode::DimMismatch, "CLS vector dims differ");
    check_unit(img_cls, "image CLS");
    check_unit(txt_cls, "text CLS");
    return dot(img_cls, txt_cls);
}

double maxsim_i2t(const EmbeddingMatrix& visual, const EmbeddingMatrix& bags,
                  const PaddingMask& mask) {
    return mean_max_similarity(visual, bags, mask);
}

double maxsim_t2i(const EmbeddingMatrix& bags, const EmbeddingMatrix& visual,
                  const PaddingMask& mask) {
    return mean_max_similarity(bags, visual, mask);
}

double tokenwise_maxsim(const EmbeddingMatrix& a, const EmbeddingMatrix& b,
                        const PaddingMask& mask) {
    return mean_max_similarity(a, b, mask);
}

SimilarityMatrix score_batch(std::span<const QueryItem> queries,
                             std::span<const CandidateItem> candidates,
                             ScoringMode mode, Direction direction) {
    SimilarityMatrix out(queries.size(), candidates.size(), mode);
    for (std::size_t q = 0; q < queries.size(); ++q) {
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            double s = 0.0;
            switch (mode) {
                case ScoringMode::Global:
                    s = global_similarity(queries[q].cls, candidates[c].cls);
                    break;
                case ScoringMode::TokenWise:
                    s = tokenwise_maxsim(queries[q].late, candidates[c].late,
                                         candidates[c].mask);
                    break;
                case ScoringMode::BagWise:
                    s = direction == Direction::ImageToText
                            ? maxsim_i2t(queries[q].late, candidates[c].late,
                                         candidates[c].mask)
                            : maxsim_t2i(queries[q].late, candidates[c].late,
                                         candidates[c].mask);
                    break;
            }
            out.at(q, c) = s;
        }
    }
    return out;
}

HeatMap heatmap(const EmbeddingMatrix& visual, std::span<const double> bag,
                std::size_t grid_h, std::size_t grid_w) {
    if (visual.rows != grid_h * grid_w)
        raise(ErrorCode::GridMismatch,
              std::to_string(visual.rows) + " patches do not fill a " +
                  std::to_string(grid_h) + "x" + std::to_string(grid_w) + " grid");
    if (visual.dim != bag.size())
        raise(ErrorCode::DimMismatch, "bag vector dim differs from patch dim");
    HeatMap map{grid_h, grid_w, std::vector<double>(grid_h * grid_w, 0.0)};
    for (std::size_t r = 0; r < visual.rows; ++r)
        map.values[r] = dot(visual.row(r), bag);
    return map;
}

} // namespace bagf
