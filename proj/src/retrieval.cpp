#include "bagf/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bagf {

namespace {

constexpr double kNormTolerance = 1e-6;

bool ranks_before(const RankedEntry& a, const RankedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
}

} // namespace

RetrievalIndex RetrievalIndex::build(std::vector<IndexItem> items) {
    RetrievalIndex index;
    std::sort(items.begin(), items.end(),
              [](const IndexItem& a, const IndexItem& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < items.size(); ++i)
        if (items[i].id == items[i - 1].id)
            raise(ErrorCode::DuplicateId, "duplicate item id: " + items[i].id);

    index.has_late_ = !items.empty();
    if (!items.empty()) {
        index.dim_ = items.front().cls.size();
        index.cls_ = EmbeddingMatrix(items.size(), index.dim_);
        for (std::size_t i = 0; i < items.size(); ++i) {
            const IndexItem& it = items[i];
            if (it.cls.size() != index.dim_)
                raise(ErrorCode::DimMismatch, "cls dim differs for item " + it.id);
            if (std::abs(l2_norm(it.cls) - 1.0) > kNormTolerance)
                raise(ErrorCode::NotNormalized,
                      "cls vector of item " + it.id + " is not unit norm");
            if (it.late) {
                if (it.mask.size() != it.late->rows)
                    raise(ErrorCode::DimMismatch,
                          "mask size differs from late rows for item " + it.id);
            } else {
                index.has_late_ = false;
            }
            std::copy(it.cls.begin(), it.cls.end(), index.cls_.row(i).begin());
        }
        index.cls_.normalized = true;
    }
    index.items_ = std::move(items);
    return index;
}

bool RetrievalIndex::supports(ScoringMode mode) const {
    if (mode == ScoringMode::Global) return true;
    return has_late_;
}

const IndexItem* RetrievalIndex::find(const std::string& id) const {
    auto it = std::lower_bound(
        items_.begin(), items_.end(), id,
        [](const IndexItem& item, const std::string& key) { return item.id < key; });
    if (it == items_.end() || it->id != id) return nullptr;
    return &*it;
}

RankedList search(const RetrievalIndex& index, const QueryItem& query,
                  std::size_t top_k) {
    if (top_k < 1) raise(ErrorCode::EmptyInput, "top_k must be at least 1");
    RankedList out;
    out.query_id = query.id;
    out.mode = ScoringMode::Global;
    if (index.size() == 0) return out;

    if (query.cls.size() != index.dim())
        raise(ErrorCode::DimMismatch, "query cls dim differs from index dim");
    if (std::abs(l2_norm(query.cls) - 1.0) > kNormTolerance)
        raise(ErrorCode::NotNormalized, "query cls is not unit norm");

    out.entries.reserve(index.size());
    const EmbeddingMatrix& cls = index.cls_matrix();
    for (std::size_t i = 0; i < index.size(); ++i)
        out.entries.push_back(
            RankedEntry{index.items()[i].id, dot(query.cls, cls.row(i))});

    const std::size_t k = std::min(top_k, out.entries.size());
    std::partial_sort(out.entries.begin(), out.entries.begin() + k,
                      out.entries.end(), ranks_before);
    out.entries.resize(k);
    return out;
}

RankedList rerank(const RetrievalIndex& index, const QueryItem& query,
                  const RankedList& candidates, ScoringMode mode,
                  Direction direction) {
    if (mode == ScoringMode::Global)
        raise(ErrorCode::UnsupportedMode, "rerank needs TokenWise or BagWise");
    if (!index.supports(mode))
        raise(ErrorCode::UnsupportedMode,
              std::string("index has no late matrices for mode ") + to_string(mode));

    RankedList out;
    out.query_id = candidates.query_id;
    out.mode = mode;
    out.entries.reserve(candidates.entries.size());
    for (const RankedEntry& e : candidates.entries) {
        const IndexItem* item = index.find(e.id);
        if (item == nullptr || !item->late)
            raise(ErrorCode::MissingLateMatrix,
                  "candidate " + e.id + " has no late matrix in the index");
        double score = 0.0;
        if (mode == ScoringMode::TokenWise) {
            score = tokenwise_maxsim(query.late, *item->late, item->mask);
        } else {
            score = direction == Direction::ImageToText
                        ? maxsim_i2t(query.late, *item->late, item->mask)
                        : maxsim_t2i(query.late, *item->late, item->mask);
        }
        out.entries.push_back(RankedEntry{e.id, score});
    }
    std::sort(out.entries.begin(), out.entries.end(), ranks_before);
    return out;
}

EvalReport evaluate(const std::vector<RankedList>& results,
                    const std::map<std::string, std::set<std::string>>& qrels,
                    const std::vector<int>& ks) {
    EvalReport report;
    for (int k : ks) report.recall_at[k] = 0.0;
    if (results.empty()) return report;

    for (const RankedList& r : results) {
        auto q = qrels.find(r.query_id);
        if (q == qrels.end())
            raise(ErrorCode::MissingQrel, "no qrels for query " + r.query_id);
        for (int k : ks) {
            const std::size_t depth =
                std::min<std::size_t>(static_cast<std::size_t>(k), r.entries.size());
            bool hit = false;
            for (std::size_t i = 0; i < depth && !hit; ++i)
                hit = q->second.count(r.entries[i].id) > 0;
            if (hit) report.recall_at[k] += 1.0;
        }
    }
    double sum = 0.0;
    for (auto& [k, v] : report.recall_at) {
        v /= static_cast<double>(results.size());
        sum += v;
    }
    report.mean_recall = sum / static_cast<double>(report.recall_at.size());
    return report;
}

} // namespace bagf
