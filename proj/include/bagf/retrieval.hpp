#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "bagf/similarity.hpp"

namespace bagf {

// One indexable item. The late matrix is shared so that many items may point
// at the same storage (the benchmark exploits this).
struct IndexItem {
    std::string id;
    std::vector<double> cls;                          // unit norm
    std::shared_ptr<const EmbeddingMatrix> late;      // null for CLS-only items
    PaddingMask mask;
};

// Immutable store of per-item CLS vectors plus optional token/bag matrices
// for re-ranking. Items are kept sorted by id; safe to share across threads.
class RetrievalIndex {
public:
    // Validates ids, dims and normalization, sorts by id. DuplicateId /
    // DimMismatch / NotNormalized on bad input. Capability inference:
    // Global always; TokenWise+BagWise when every item has a late matrix.
    static RetrievalIndex build(std::vector<IndexItem> items);

    std::size_t size() const { return items_.size(); }
    std::size_t dim() const { return dim_; }
    bool supports(ScoringMode mode) const;
    const IndexItem* find(const std::string& id) const;
    const std::vector<IndexItem>& items() const { return items_; }

    // CLS vectors as one matrix, rows in index (id-sorted) order.
    const EmbeddingMatrix& cls_matrix() const { return cls_; }

private:
    std::vector<IndexItem> items_;
    EmbeddingMatrix cls_;
    std::size_t dim_ = 0;
    bool has_late_ = false;
};

struct RankedEntry {
    std::string id;
    double score = 0.0;
};

// Scores are non-increasing; ties broken by ascending item id.
struct RankedList {
    std::string query_id;
    ScoringMode mode = ScoringMode::Global;
    std::vector<RankedEntry> entries;
};

struct EvalReport {
    std::map<int, double> recall_at;   // K -> fraction of queries hit in top K
    double mean_recall = 0.0;
};

// Stage 1: exhaustive CLS scan, top_k best by dot product. A top_k larger
// than the index returns the full ranking. UnsupportedMode if the index
// cannot score globally; NotNormalized/DimMismatch on bad queries.
RankedList search(const RetrievalIndex& index, const QueryItem& query,
                  std::size_t top_k);

// Stage 2: rescores the candidate list with the selected MaxSim kernel and
// re-sorts it. Pure replacement: stage-1 scores are discarded for the listed
// candidates, and items outside the list are untouched. MissingLateMatrix if
// a candidate lacks rows to rescore; UnsupportedMode for Global.
RankedList rerank(const RetrievalIndex& index, const QueryItem& query,
                  const RankedList& candidates, ScoringMode mode,
                  Direction direction);

// Recall@K over ranked results: the fraction of queries with at least one
// relevant item among the top K. mean_recall averages the reported recalls.
// MissingQrel if a result query has no qrel entry.
EvalReport evaluate(const std::vector<RankedList>& results,
                    const std::map<std::string, std::set<std::string>>& qrels,
                    const std::vector<int>& ks = {1, 5, 10});

} // namespace bagf
