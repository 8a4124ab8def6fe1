#include "bagf/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bagf {

namespace {

// Softmax cross entropy over rows and columns of scores/tau with the
// diagonal as targets. Rows give L_i2t, columns L_t2i, and the combined loss
// is their mean. Gradients are the usual (softmax - onehot) form, divided by
// bs and tau, averaged over the two directions.
LossReport softmax_contrastive(const SimilarityMatrix& scores,
                               const Temperature& tau) {
    if (scores.queries != scores.candidates)
        raise(ErrorCode::NonSquare,
              "score matrix is " + std::to_string(scores.queries) + "x" +
                  std::to_string(scores.candidates));
    if (!(tau.tau > 0.0))
        raise(ErrorCode::NonPositiveTau, "temperature must be positive");

    const std::size_t bs = scores.queries;
    const double t = tau.tau;
    LossReport report;
    report.batch = bs;
    report.grad_scores.assign(bs * bs, 0.0);

    std::vector<double> row_p(bs * bs), col_p(bs * bs);

    // Row-wise softmax (image-to-text), stabilized by the row max.
    double total_i2t = 0.0;
    for (std::size_t i = 0; i < bs; ++i) {
        double mx = scores.at(i, 0) / t;
        for (std::size_t j = 1; j < bs; ++j) mx = std::max(mx, scores.at(i, j) / t);
        double sum = 0.0;
        for (std::size_t j = 0; j < bs; ++j) {
            const double e = std::exp(scores.at(i, j) / t - mx);
            row_p[i * bs + j] = e;
            sum += e;
        }
        for (std::size_t j = 0; j < bs; ++j) row_p[i * bs + j] /= sum;
        total_i2t += scores.at(i, i) / t - mx - std::log(sum);
    }
    report.l_i2t = -total_i2t / static_cast<double>(bs);

    // Column-wise softmax (text-to-image).
    double total_t2i = 0.0;
    for (std::size_t j = 0; j < bs; ++j) {
        double mx = scores.at(0, j) / t;
        for (std::size_t i = 1; i < bs; ++i) mx = std::max(mx, scores.at(i, j) / t);
        double sum = 0.0;
        for (std::size_t i = 0; i < bs; ++i) {
            const double e = std::exp(scores.at(i, j) / t - mx);
            col_p[i * bs + j] = e;
            sum += e;
        }
        for (std::size_t i = 0; i < bs; ++i) col_p[i * bs + j] /= sum;
        total_t2i += scores.at(j, j) / t - mx - std::log(sum);
    }
    report.l_t2i = -total_t2i / static_cast<double>(bs);

    report.loss = (report.l_i2t + report.l_t2i) / 2.0;

    // d loss / d s_ij and d loss / d tau, averaged over the two directions.
    double gtau = 0.0;
    const double inv = 1.0 / (static_cast<double>(bs) * t);
    for (std::size_t i = 0; i < bs; ++i) {
        for (std::size_t j = 0; j < bs; ++j) {
            const double delta = i == j ? 1.0 : 0.0;
            const double g =
                0.5 * inv * ((row_p[i * bs + j] - delta) + (col_p[i * bs + j] - delta));
            report.grad_scores[i * bs + j] = g;
            gtau += g * (-scores.at(i, j) / t);
        }
    }
    report.grad_tau = gtau;
    return report;
}

} // namespace

LossReport itc_loss(const SimilarityMatrix& scores, const Temperature& tau) {
    return softmax_contrastive(scores, tau);
}

LossReport bwc_loss(const SimilarityMatrix& bag_scores, const Temperature& tau) {
    return softmax_contrastive(bag_scores, tau);
}

double grad_check(const LossFn& loss_fn, const SimilarityMatrix& scores,
                  const Temperature& tau, double epsilon) {
    const LossReport analytic = loss_fn(scores, tau);
    auto rel_error = [](double a, double n) {
        const double denom = std::max(std::abs(a) + std::abs(n), 1e-8);
        return std::abs(a - n) / denom;
    };

    double worst = 0.0;
    SimilarityMatrix probe = scores;
    for (std::size_t k = 0; k < probe.scores.size(); ++k) {
        const double saved = probe.scores[k];
        probe.scores[k] = saved + epsilon;
        const double up = loss_fn(probe, tau).loss;
        probe.scores[k] = saved - epsilon;
        const double down = loss_fn(probe, tau).loss;
        probe.scores[k] = saved;
        const double numeric = (up - down) / (2.0 * epsilon);
        worst = std::max(worst, rel_error(analytic.grad_scores[k], numeric));
    }

    Temperature up_tau{tau.tau + epsilon};
    Temperature down_tau{tau.tau - epsilon};
    const double numeric_tau =
        (loss_fn(scores, up_tau).loss - loss_fn(scores, down_tau).loss) /
        (2.0 * epsilon);
    worst = std::max(worst, rel_error(analytic.grad_tau, numeric_tau));
    return worst;
}

EmbeddingMatrix lookup_rows(std::span<const TokenId> tokens,
                            const EmbeddingMatrix& table) {
    EmbeddingMatrix out(tokens.size(), table.dim);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const TokenId t = tokens[i];
        if (t < 0 || static_cast<std::size_t>(t) >= table.rows)
            raise(ErrorCode::TokenOutOfRange,
                  "token id " + std::to_string(t) + " outside table of " +
                      std::to_string(table.rows) + " rows");
        std::copy(table.row(t).begin(), table.row(t).end(), out.row(i).begin());
    }
    return out;
}

EncodedText encode_text_pipeline(std::span<const TokenId> tokens,
                                 const EmbeddingMatrix& table,
                                 const LinearMixer& mixer,
                                 const BaggingHelper& helper,
                                 const ProjectionHead& head,
                                 BaggingPlacement placement, bool renormalize) {
    if (tokens.empty())
        raise(ErrorCode::EmptyInput, "text must contain at least the CLS token");

    EncodedText out;
    const std::span<const TokenId> rest = tokens.subspan(1);
    if (!rest.empty()) out.seg = segment(rest, helper);

    const EmbeddingMatrix looked_up = lookup_rows(tokens, table);
    if (placement == BaggingPlacement::Early) {
        ClsAndBags cb = bag_cls_passthrough(looked_up, out.seg, renormalize);
        EmbeddingMatrix stacked(cb.bags.rows + 1, looked_up.dim);
        std::copy(cb.cls.begin(), cb.cls.end(), stacked.row(0).begin());
        std::copy(cb.bags.data.begin(), cb.bags.data.end(),
                  stacked.data.begin() + stacked.dim);
        const EmbeddingMatrix projected = project(mix(stacked, mixer), head);
        out.cls = l2_normalized(projected.row(0));
        out.bags = EmbeddingMatrix(projected.rows - 1, projected.dim);
        std::copy(projected.data.begin() + projected.dim, projected.data.end(),
                  out.bags.data.begin());
    } else {
        const EmbeddingMatrix projected = project(mix(looked_up, mixer), head);
        ClsAndBags cb = bag_cls_passthrough(projected, out.seg, renormalize);
        out.cls = l2_normalized(cb.cls);
        out.bags = std::move(cb.bags);
    }
    return out;
}

} // namespace bagf
