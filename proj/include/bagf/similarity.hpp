#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bagf/embedding.hpp"

namespace bagf {

enum class ScoringMode { Global, TokenWise, BagWise };

const char* to_string(ScoringMode mode);                 // "global" etc.
ScoringMode scoring_mode_from_string(std::string_view s);

enum class Direction { ImageToText, TextToImage };

const char* to_string(Direction d);                      // "i2t" / "t2i"
Direction direction_from_string(std::string_view s);

// Per-row validity flags for a candidate's bag (or token) matrix. Padding is
// expressed through masks; the kernels never see sentinel vectors.
struct PaddingMask {
    std::vector<std::uint8_t> valid;

    static PaddingMask all_valid(std::size_t n) {
        return PaddingMask{std::vector<std::uint8_t>(n, 1)};
    }
    std::size_t size() const { return valid.size(); }
    bool is_valid(std::size_t i) const { return valid[i] != 0; }
    std::size_t valid_count() const {
        std::size_t n = 0;
        for (auto v : valid) n += (v != 0);
        return n;
    }
};

struct SimilarityMatrix {
    std::size_t queries = 0;
    std::size_t candidates = 0;
    std::vector<double> scores;   // queries * candidates, row-major
    ScoringMode mode = ScoringMode::Global;

    SimilarityMatrix() = default;
    SimilarityMatrix(std::size_t q, std::size_t c, ScoringMode m)
        : queries(q), candidates(c), scores(q * c, 0.0), mode(m) {}

    double at(std::size_t q, std::size_t c) const { return scores[q * candidates + c]; }
    double& at(std::size_t q, std::size_t c) { return scores[q * candidates + c]; }
};

// Dot product of two unit vectors. DimMismatch on size, NotNormalized if
// either norm deviates from 1 by more than 1e-6.
double global_similarity(std::span<const double> img_cls,
                         std::span<const double> txt_cls);

// Mean over visual rows of the maximum dot product against valid bag rows.
// EmptyMask if no bag row is valid; DimMismatch on inconsistent shapes;
// EmptyInput if visual has no rows. Rows exclude the CLS entries.
double maxsim_i2t(const EmbeddingMatrix& visual, const EmbeddingMatrix& bags,
                  const PaddingMask& mask);

// Mirror of maxsim_i2t with roles swapped: mean over bag rows of the maximum
// dot product against valid visual rows.
double maxsim_t2i(const EmbeddingMatrix& bags, const EmbeddingMatrix& visual,
                  const PaddingMask& mask);

// Same formula with raw token rows on the candidate side; equivalently
// bag-wise scoring under an all-singleton segmentation.
double tokenwise_maxsim(const EmbeddingMatrix& a, const EmbeddingMatrix& b,
                        const PaddingMask& mask);

// One retrieval query. Query matrices are exact-sized, so carry no mask.
struct QueryItem {
    std::string id;
    std::vector<double> cls;
    EmbeddingMatrix late;   // patches for images, bags/tokens for texts
};

struct CandidateItem {
    std::string id;
    std::vector<double> cls;
    EmbeddingMatrix late;
    PaddingMask mask;
};

// Dense queries x candidates score matrix; each cell is computed by the
// mode's kernel. Cells are independent, so parallel evaluation would be
// bit-identical to this sequential one.
SimilarityMatrix score_batch(std::span<const QueryItem> queries,
                             std::span<const CandidateItem> candidates,
                             ScoringMode mode, Direction direction);

struct HeatMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;   // row-major

    double at(std::size_t r, std::size_t c) const { return values[r * width + c]; }
};

// Per-patch dot product with one bag vector, reshaped to the patch grid.
// GridMismatch unless visual.rows == grid_h * grid_w.
HeatMap heatmap(const EmbeddingMatrix& visual, std::span<const double> bag,
                std::size_t grid_h, std::size_t grid_w);

} // namespace bagf
