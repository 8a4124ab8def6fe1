#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "bagf/contrastive.hpp"

namespace bagf {

namespace {

struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;
    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
    double* row(std::size_t r) { return a.data() + r * cols; }
    const double* row(std::size_t r) const { return a.data() + r * cols; }
};

// out += lhs^T * rhs, lhs is (n x r), rhs is (n x c), out is (r x c).
void add_at_b(const Matrix& lhs, const Matrix& rhs, std::vector<double>& out) {
    for (std::size_t i = 0; i < lhs.rows; ++i) {
        const double* l = lhs.row(i);
        const double* r = rhs.row(i);
        for (std::size_t p = 0; p < lhs.cols; ++p) {
            const double v = l[p];
            if (v == 0.0) continue;
            double* o = out.data() + p * rhs.cols;
            for (std::size_t q = 0; q < rhs.cols; ++q) o[q] += v * r[q];
        }
    }
}

// out = in * w, w is (in.cols x cols_out) row-major.
Matrix mat_mul(const Matrix& in, const std::vector<double>& w,
               std::size_t cols_out) {
    Matrix out(in.rows, cols_out);
    for (std::size_t i = 0; i < in.rows; ++i) {
        const double* src = in.row(i);
        double* dst = out.row(i);
        for (std::size_t p = 0; p < in.cols; ++p) {
            const double v = src[p];
            if (v == 0.0) continue;
            const double* wrow = w.data() + p * cols_out;
            for (std::size_t q = 0; q < cols_out; ++q) dst[q] += v * wrow[q];
        }
    }
    return out;
}

// out = in * w^T, w is (rows_out x in.cols) interpreted transposed.
Matrix mat_mul_t(const Matrix& in, const std::vector<double>& w,
                 std::size_t cols_out) {
    Matrix out(in.rows, cols_out);
    for (std::size_t i = 0; i < in.rows; ++i) {
        const double* src = in.row(i);
        double* dst = out.row(i);
        for (std::size_t q = 0; q < cols_out; ++q) {
            const double* wrow = w.data() + q * in.cols;
            double s = 0.0;
            for (std::size_t p = 0; p < in.cols; ++p) s += src[p] * wrow[p];
            dst[q] = s;
        }
    }
    return out;
}

Matrix from_embedding(const EmbeddingMatrix& m) {
    Matrix out(m.rows, m.dim);
    out.a = m.data;
    return out;
}

constexpr double kZeroNorm = 1e-12;

// Normalizes rows in place, keeping the pre-normalization norms for the
// backward pass. Throws ZeroRow on degenerate rows.
std::vector<double> normalize_rows_inplace(Matrix& m) {
    std::vector<double> norms(m.rows);
    for (std::size_t r = 0; r < m.rows; ++r) {
        double s = 0.0;
        const double* row = m.row(r);
        for (std::size_t c = 0; c < m.cols; ++c) s += row[c] * row[c];
        const double n = std::sqrt(s);
        if (n < kZeroNorm)
            raise(ErrorCode::ZeroRow, "zero row in trainer forward pass");
        norms[r] = n;
        for (std::size_t c = 0; c < m.cols; ++c) m.row(r)[c] /= n;
    }
    return norms;
}

// d/dx of x_hat = x / |x|:  dx = (g - (g . x_hat) x_hat) / |x|.
void l2_backward_row(const double* grad_hat, const double* hat, double norm,
                     std::size_t dim, double* grad_out) {
    double proj = 0.0;
    for (std::size_t c = 0; c < dim; ++c) proj += grad_hat[c] * hat[c];
    for (std::size_t c = 0; c < dim; ++c)
        grad_out[c] += (grad_hat[c] - proj * hat[c]) / norm;
}

// Forward state of one encoded pair that the backward pass needs.
struct PairState {
    // Image side: x_hat rows (cls + patches), pre-normalization norms.
    Matrix image_raw;      // frozen input features
    Matrix image_hat;      // normalized projected rows
    std::vector<double> image_norms;

    // Text side.
    Matrix text_mixed;         // frozen: lookup * mixer (Late), bagged * mixer (Early)
    Matrix text_projected;     // text_mixed * G_t
    BagSegmentation seg;
    std::vector<double> text_cls_hat;   // unit cls
    double text_cls_norm = 0.0;
    Matrix bags;                        // final bag rows fed to MaxSim
    std::vector<double> bag_norms;      // set when renormalizing (Late)
};

struct TrainerImpl {
    const TrainData& data;
    const TrainConfig& cfg;
    std::size_t joint = 0;
    std::size_t dim_v = 0, dim_t = 0;

    std::vector<double> g_v, g_t;   // head weights, row-major
    Temperature tau_itc, tau_bwc;

    TrainerImpl(const TrainData& d, const TrainConfig& c) : data(d), cfg(c) {
        joint = cfg.joint_dim;
        dim_v = data.pairs.front().image_features.dim;
        dim_t = data.table.dim;
        g_v = ProjectionHead::random(dim_v, joint, cfg.seed).weight;
        g_t = ProjectionHead::random(dim_t, joint, cfg.seed + 1).weight;
        tau_itc.tau = cfg.tau_init;
        tau_bwc.tau = cfg.tau_init;
    }

    PairState encode_pair(const TrainPair& pair) const {
        PairState st;
        st.image_raw = from_embedding(pair.image_features);
        st.image_hat = mat_mul(st.image_raw, g_v, joint);
        st.image_norms = normalize_rows_inplace(st.image_hat);

        const EmbeddingMatrix looked =
            lookup_rows(pair.text_tokens, data.table);
        const std::span<const TokenId> rest(pair.text_tokens.data() + 1,
                                            pair.text_tokens.size() - 1);
        if (!rest.empty()) st.seg = segment(rest, data.helper);

        if (cfg.placement == BaggingPlacement::Late) {
            st.text_mixed = from_embedding(mix(looked, data.mixer));
            st.text_projected = mat_mul(st.text_mixed, g_t, joint);

            const double* cls = st.text_projected.row(0);
            st.text_cls_norm = l2_norm({cls, joint});
            if (st.text_cls_norm < kZeroNorm)
                raise(ErrorCode::ZeroRow, "zero text CLS row");
            st.text_cls_hat.assign(cls, cls + joint);
            for (double& x : st.text_cls_hat) x /= st.text_cls_norm;

            st.bags = Matrix(st.seg.bag_count(), joint);
            for (std::size_t j = 0; j < st.seg.bag_count(); ++j) {
                double* o = st.bags.row(j);
                for (std::size_t r = st.seg.bags[j].begin; r < st.seg.bags[j].end; ++r) {
                    const double* src = st.text_projected.row(r + 1);
                    for (std::size_t c = 0; c < joint; ++c) o[c] += src[c];
                }
            }
            if (cfg.renormalize) st.bag_norms = normalize_rows_inplace(st.bags);
        } else {
            // Early: bag the frozen lookup, then mix and project. Only G_t
            // receives gradients, through the final projection.
            ClsAndBags cb = bag_cls_passthrough(looked, st.seg, cfg.renormalize);
            EmbeddingMatrix stacked(cb.bags.rows + 1, looked.dim);
            std::copy(cb.cls.begin(), cb.cls.end(), stacked.row(0).begin());
            std::copy(cb.bags.data.begin(), cb.bags.data.end(),
                      stacked.data.begin() + stacked.dim);
            st.text_mixed = from_embedding(mix(stacked, data.mixer));
            st.text_projected = mat_mul(st.text_mixed, g_t, joint);

            const double* cls = st.text_projected.row(0);
            st.text_cls_norm = l2_norm({cls, joint});
            if (st.text_cls_norm < kZeroNorm)
                raise(ErrorCode::ZeroRow, "zero text CLS row");
            st.text_cls_hat.assign(cls, cls + joint);
            for (double& x : st.text_cls_hat) x /= st.text_cls_norm;

            st.bags = Matrix(st.text_projected.rows - 1, joint);
            std::copy(st.text_projected.a.begin() + joint,
                      st.text_projected.a.end(), st.bags.a.begin());
        }
        return st;
    }

    // One gradient step over the given pair indices. Returns the epoch stats
    // contribution (losses before the update).
    EpochStats step(std::span<const std::size_t> batch) {
        const std::size_t bs = batch.size();
        std::vector<PairState> states;
        states.reserve(bs);
        for (std::size_t idx : batch) states.push_back(encode_pair(data.pairs[idx]));

        // Global CLS scores.
        SimilarityMatrix s_itc(bs, bs, ScoringMode::Global);
        for (std::size_t i = 0; i < bs; ++i)
            for (std::size_t j = 0; j < bs; ++j)
                s_itc.at(i, j) = dot({states[i].image_hat.row(0), joint},
                                     {states[j].text_cls_hat.data(), joint});

        // Bag-wise scores with argmax bookkeeping for the backward pass.
        SimilarityMatrix s_bwc(bs, bs, ScoringMode::BagWise);
        std::vector<std::vector<std::uint32_t>> argmax(bs * bs);
        if (cfg.lambda != 0.0) {
            for (std::size_t i = 0; i < bs; ++i) {
                const Matrix& vis = states[i].image_hat;
                const std::size_t n = vis.rows - 1;
                for (std::size_t j = 0; j < bs; ++j) {
                    const Matrix& bags = states[j].bags;
                    if (n == 0 || bags.rows == 0)
                        raise(ErrorCode::EmptyInput,
                              "bag-wise loss needs patches and bags");
                    auto& arg = argmax[i * bs + j];
                    arg.resize(n);
                    double total = 0.0;
                    for (std::size_t r = 0; r < n; ++r) {
                        const double* v = vis.row(r + 1);
                        double best = -1e300;
                        std::uint32_t best_j = 0;
                        for (std::size_t m = 0; m < bags.rows; ++m) {
                            const double* b = bags.row(m);
                            double s = 0.0;
                            for (std::size_t c = 0; c < joint; ++c) s += v[c] * b[c];
                            if (s > best) {
                                best = s;
                                best_j = static_cast<std::uint32_t>(m);
                            }
                        }
                        arg[r] = best_j;
                        total += best;
                    }
                    s_bwc.at(i, j) = total / static_cast<double>(n);
                }
            }
        }

        const LossReport itc = itc_loss(s_itc, tau_itc);
        LossReport bwc;
        if (cfg.lambda != 0.0) bwc = bwc_loss(s_bwc, tau_bwc);

        const double total_loss = itc.loss + cfg.lambda * bwc.loss;
        if (!std::isfinite(total_loss))
            raise(ErrorCode::DivergenceDetected, "loss became non-finite");

        // Backward. Gradients on the normalized embeddings first.
        std::vector<Matrix> d_image_hat(bs), d_bags(bs);
        std::vector<std::vector<double>> d_text_cls(bs);
        for (std::size_t i = 0; i < bs; ++i) {
            d_image_hat[i] = Matrix(states[i].image_hat.rows, joint);
            d_bags[i] = Matrix(states[i].bags.rows, joint);
            d_text_cls[i].assign(joint, 0.0);
        }

        for (std::size_t i = 0; i < bs; ++i) {
            for (std::size_t j = 0; j < bs; ++j) {
                const double g = itc.grad_scores[i * bs + j];
                if (g == 0.0) continue;
                const double* v = states[i].image_hat.row(0);
                const double* t = states[j].text_cls_hat.data();
                double* dv = d_image_hat[i].row(0);
                double* dt = d_text_cls[j].data();
                for (std::size_t c = 0; c < joint; ++c) {
                    dv[c] += g * t[c];
                    dt[c] += g * v[c];
                }
            }
        }

        if (cfg.lambda != 0.0) {
            for (std::size_t i = 0; i < bs; ++i) {
                const std::size_t n = states[i].image_hat.rows - 1;
                const double inv_n = 1.0 / static_cast<double>(n);
                for (std::size_t j = 0; j < bs; ++j) {
                    const double g =
                        cfg.lambda * bwc.grad_scores[i * bs + j] * inv_n;
                    if (g == 0.0) continue;
                    const auto& arg = argmax[i * bs + j];
                    for (std::size_t r = 0; r < n; ++r) {
                        const double* v = states[i].image_hat.row(r + 1);
                        const double* b = states[j].bags.row(arg[r]);
                        double* dv = d_image_hat[i].row(r + 1);
                        double* db = d_bags[j].row(arg[r]);
                        for (std::size_t c = 0; c < joint; ++c) {
                            dv[c] += g * b[c];
                            db[c] += g * v[c];
                        }
                    }
                }
            }
        }

        // Through the image-side normalization and projection.
        std::vector<double> grad_gv(dim_v * joint, 0.0);
        for (std::size_t i = 0; i < bs; ++i) {
            const PairState& st = states[i];
            Matrix d_proj(st.image_hat.rows, joint);
            for (std::size_t r = 0; r < st.image_hat.rows; ++r)
                l2_backward_row(d_image_hat[i].row(r), st.image_hat.row(r),
                                st.image_norms[r], joint, d_proj.row(r));
            add_at_b(st.image_raw, d_proj, grad_gv);
        }

        // Through the text side.
        std::vector<double> grad_gt(dim_t * joint, 0.0);
        for (std::size_t j = 0; j < bs; ++j) {
            const PairState& st = states[j];
            Matrix d_proj(st.text_projected.rows, joint);

            l2_backward_row(d_text_cls[j].data(), st.text_cls_hat.data(),
                            st.text_cls_norm, joint, d_proj.row(0));

            if (cfg.placement == BaggingPlacement::Late) {
                for (std::size_t b = 0; b < st.seg.bag_count(); ++b) {
                    std::vector<double> d_sum(joint, 0.0);
                    if (cfg.renormalize) {
                        l2_backward_row(d_bags[j].row(b), st.bags.row(b),
                                        st.bag_norms[b], joint, d_sum.data());
                    } else {
                        std::copy(d_bags[j].row(b), d_bags[j].row(b) + joint,
                                  d_sum.begin());
                    }
                    for (std::size_t r = st.seg.bags[b].begin;
                         r < st.seg.bags[b].end; ++r) {
                        double* dst = d_proj.row(r + 1);
                        for (std::size_t c = 0; c < joint; ++c) dst[c] += d_sum[c];
                    }
                }
            } else {
                // Early: bag rows are projection outputs directly.
                for (std::size_t b = 0; b < st.bags.rows; ++b)
                    std::copy(d_bags[j].row(b), d_bags[j].row(b) + joint,
                              d_proj.row(b + 1));
            }
            add_at_b(st.text_mixed, d_proj, grad_gt);
        }

        // Temperature gradient(s).
        double d_tau_itc = itc.grad_tau;
        double d_tau_bwc = cfg.lambda != 0.0 ? cfg.lambda * bwc.grad_tau : 0.0;

        const double lr = cfg.learning_rate;
        for (std::size_t k = 0; k < g_v.size(); ++k) g_v[k] -= lr * grad_gv[k];
        for (std::size_t k = 0; k < g_t.size(); ++k) g_t[k] -= lr * grad_gt[k];
        if (cfg.separate_temperatures) {
            tau_itc.tau -= lr * d_tau_itc;
            tau_bwc.tau -= lr * d_tau_bwc;
        } else {
            tau_itc.tau -= lr * (d_tau_itc + d_tau_bwc);
            tau_bwc.tau = tau_itc.tau;
        }
        tau_itc.clamp();
        tau_bwc.clamp();

        return EpochStats{itc.loss, bwc.loss, tau_itc.tau};
    }
};

} // namespace

TrainResult train_heads(const TrainData& data, const TrainConfig& config) {
    if (data.pairs.size() < 2)
        raise(ErrorCode::EmptyInput, "training needs at least 2 pairs");
    const std::size_t batch =
        config.batch_size == 0
            ? data.pairs.size()
            : std::min<std::size_t>(config.batch_size, data.pairs.size());
    if (batch < 2)
        raise(ErrorCode::EmptyInput, "batch size must be at least 2");

    TrainerImpl impl(data, config);
    std::mt19937_64 shuffle_rng(config.seed * 0x9e3779b97f4a7c15ULL + 1);

    TrainResult result;
    std::vector<std::size_t> order(data.pairs.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (batch < order.size())
            std::shuffle(order.begin(), order.end(), shuffle_rng);
        double sum_itc = 0.0, sum_bwc = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start + batch <= order.size();
             start += batch) {
            try {
                EpochStats s = impl.step(
                    std::span<const std::size_t>(order.data() + start, batch));
                sum_itc += s.l_itc;
                sum_bwc += s.l_bwc;
                ++steps;
            } catch (const Error& e) {
                if (e.code() == ErrorCode::ZeroRow)
                    raise(ErrorCode::DivergenceDetected,
                          "forward pass degenerated: " + std::string(e.what()));
                throw;
            }
        }
        result.curve.push_back(EpochStats{sum_itc / static_cast<double>(steps),
                                          sum_bwc / static_cast<double>(steps),
                                          impl.tau_itc.tau});
    }

    result.image_head =
        ProjectionHead{impl.dim_v, impl.joint, std::move(impl.g_v)};
    result.text_head =
        ProjectionHead{impl.dim_t, impl.joint, std::move(impl.g_t)};
    result.tau = impl.tau_itc;
    result.tau_bwc = impl.tau_bwc;
    return result;
}

} // namespace bagf
