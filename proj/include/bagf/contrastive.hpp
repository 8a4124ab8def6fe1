#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "bagf/bagging.hpp"
#include "bagf/embedding.hpp"
#include "bagf/similarity.hpp"

namespace bagf {

// Learnable softmax temperature, clamped to [1e-3, 10] during training.
struct Temperature {
    static constexpr double kMin = 1e-3;
    static constexpr double kMax = 10.0;

    double tau = 0.07;

    void clamp() {
        if (tau < kMin) tau = kMin;
        if (tau > kMax) tau = kMax;
    }
};

// Loss value and analytic gradients for one contrastive objective evaluated
// on a square in-batch score matrix (diagonal entries are the positive
// pairs). loss == (l_i2t + l_t2i) / 2 by construction.
struct LossReport {
    double l_i2t = 0.0;               // row-wise softmax cross entropy
    double l_t2i = 0.0;               // column-wise softmax cross entropy
    double loss = 0.0;
    std::vector<double> grad_scores;  // d loss / d scores, bs*bs row-major
    double grad_tau = 0.0;
    std::size_t batch = 0;
};

// Image-text contrastive loss over global similarities. NonSquare unless the
// matrix is bs x bs; NonPositiveTau unless tau.tau > 0.
LossReport itc_loss(const SimilarityMatrix& scores, const Temperature& tau);

// Bag-wise contrastive loss: the same softmax form applied to bag-wise score
// matrices.
LossReport bwc_loss(const SimilarityMatrix& bag_scores, const Temperature& tau);

using LossFn =
    std::function<LossReport(const SimilarityMatrix&, const Temperature&)>;

// Compares analytic grad_scores and grad_tau against central finite
// differences at step epsilon (valid range [1e-7, 1e-3]); returns the worst
// relative error observed.
double grad_check(const LossFn& loss_fn, const SimilarityMatrix& scores,
                  const Temperature& tau, double epsilon);

enum class BaggingPlacement { Early, Late };

struct EncodedText {
    std::vector<double> cls;   // always unit norm
    EmbeddingMatrix bags;
    BagSegmentation seg;
};

// Runs a token sequence through the frozen encoder stand-in and the bagging
// layer. Row 0 of the lookup is the CLS token and is never summed into a bag.
//   Early: lookup, bag-aggregate (renormalize per flag), mix, project.
//   Late:  lookup, mix, project, bag-aggregate (renormalize per flag).
// The flag controls L2 renormalization of summed bags at the bagging point;
// the CLS vector is always normalized at the end. TokenOutOfRange if an id
// does not index a table row.
EncodedText encode_text_pipeline(std::span<const TokenId> tokens,
                                 const EmbeddingMatrix& table,
                                 const LinearMixer& mixer,
                                 const BaggingHelper& helper,
                                 const ProjectionHead& head,
                                 BaggingPlacement placement, bool renormalize);

// Looks up one row per token id. TokenOutOfRange on bad ids.
EmbeddingMatrix lookup_rows(std::span<const TokenId> tokens,
                            const EmbeddingMatrix& table);

// --- Desk-scale trainer -----------------------------------------------------

// One image/text pair of a training set. Image features are raw encoder
// outputs (row 0 = CLS feature, remaining rows = patches); the text is a
// token-id sequence whose first token acts as the sequence CLS.
struct TrainPair {
    EmbeddingMatrix image_features;
    std::vector<TokenId> text_tokens;
};

// Frozen encoders plus the trainables' shapes. The table and mixer never
// receive gradients.
struct TrainData {
    std::vector<TrainPair> pairs;
    EmbeddingMatrix table;    // token-id -> text feature row
    LinearMixer mixer;
    BaggingHelper helper;
};

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 0;        // 0 = full batch
    double learning_rate = 1.0;
    double lambda = 1.0;               // weight of the bag-wise loss
    double tau_init = 0.07;
    bool separate_temperatures = false;
    bool renormalize = true;
    BaggingPlacement placement = BaggingPlacement::Late;
    std::size_t joint_dim = 64;
    std::uint64_t seed = 1;
};

struct EpochStats {
    double l_itc = 0.0;
    double l_bwc = 0.0;
    double tau = 0.0;
};

struct TrainResult {
    ProjectionHead image_head;
    ProjectionHead text_head;
    Temperature tau;       // shared, or the ITC temperature when separate
    Temperature tau_bwc;   // equals tau unless separate_temperatures
    std::vector<EpochStats> curve;
};

// Plain gradient descent on L = L_itc + lambda * L_bwc through the two
// projection heads and the temperature(s); table and mixer stay frozen.
// Deterministic given config.seed. DivergenceDetected if the loss becomes
// non-finite or the forward pass degenerates to a zero row.
TrainResult train_heads(const TrainData& data, const TrainConfig& config);

} // namespace bagf
