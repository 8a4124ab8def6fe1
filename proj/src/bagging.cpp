#include "bagf/bagging.hpp"

#include <string>

namespace bagf {

void Vocabulary::add(std::vector<TokenId> sequence) {
    if (sequence.empty())
        raise(ErrorCode::EmptyInput, "vocabulary entries must be non-empty");
    sequences.push_back(std::move(sequence));
}

bool BaggingHelper::contains(std::span<const TokenId> sequence) const {
    std::uint32_t node = 0;
    for (TokenId t : sequence) {
        auto it = nodes_[node].next.find(t);
        if (it == nodes_[node].next.end()) return false;
        node = it->second;
    }
    return nodes_[node].terminal;
}

std::size_t BaggingHelper::longest_match(std::span<const TokenId> tokens,
                                         std::size_t start) const {
    std::uint32_t node = 0;
    std::size_t best = 0;
    for (std::size_t i = start; i < tokens.size(); ++i) {
        auto it = nodes_[node].next.find(tokens[i]);
        if (it == nodes_[node].next.end()) break;
        node = it->second;
        if (nodes_[node].terminal) best = i - start + 1;
    }
    return best;
}

void BaggingHelper::insert(std::span<const TokenId> sequence) {
    if (sequence.empty())
        raise(ErrorCode::EmptyInput, "cannot insert an empty sequence");
    std::uint32_t node = 0;
    for (TokenId t : sequence) {
        auto it = nodes_[node].next.find(t);
        if (it == nodes_[node].next.end()) {
            nodes_.push_back(Node{});
            std::uint32_t child = static_cast<std::uint32_t>(nodes_.size() - 1);
            nodes_[node].next.emplace(t, child);
            node = child;
        } else {
            node = it->second;
        }
    }
    if (nodes_[node].terminal)
        raise(ErrorCode::DuplicateEntry, "duplicate vocabulary token sequence");
    nodes_[node].terminal = true;
    ++vocab_size_;
}

BaggingHelper build_helper(const Vocabulary& vocab) {
    if (vocab.empty())
        raise(ErrorCode::EmptyVocabulary, "vocabulary has no entries");
    BaggingHelper helper;
    for (const auto& seq : vocab.sequences)
        helper.insert(std::span<const TokenId>(seq.data(), seq.size()));
    return helper;
}

BagSegmentation segment(std::span<const TokenId> tokens,
                        const BaggingHelper& helper) {
    if (tokens.empty())
        raise(ErrorCode::EmptyInput, "cannot segment an empty token sequence");
    BagSegmentation seg;
    seg.total_tokens = tokens.size();
    std::size_t pos = 0;
    while (pos < tokens.size()) {
        std::size_t len = helper.longest_match(tokens, pos);
        if (len == 0) len = 1;   // singleton fallback keeps segmentation total
        seg.bags.push_back(TokenSpan{pos, pos + len});
        seg.offsets.push_back(pos);
        pos += len;
    }
    return seg;
}

namespace {

void check_coverage(const BagSegmentation& seg, std::size_t rows) {
    if (seg.total_tokens != rows)
        raise(ErrorCode::CoverageMismatch,
              "segmentation covers " + std::to_string(seg.total_tokens) +
                  " tokens but matrix has " + std::to_string(rows) + " rows");
    std::size_t expect = 0;
    for (std::size_t j = 0; j < seg.bags.size(); ++j) {
        const TokenSpan& s = seg.bags[j];
        if (s.begin != expect || s.end <= s.begin ||
            seg.offsets.size() <= j || seg.offsets[j] != s.begin)
            raise(ErrorCode::CoverageMismatch,
                  "bag " + std::to_string(j) + " breaks the cover property");
        expect = s.end;
    }
    if (expect != rows || seg.bags.size() != seg.offsets.size())
        raise(ErrorCode::CoverageMismatch, "spans do not cover all rows");
}

} // namespace

EmbeddingMatrix aggregate_bags(const EmbeddingMatrix& token_embs,
                               const BagSegmentation& seg, bool renormalize) {
    check_coverage(seg, token_embs.rows);
    EmbeddingMatrix out(seg.bag_count(), token_embs.dim);
    for (std::size_t j = 0; j < seg.bag_count(); ++j) {
        double* o = out.data.data() + j * out.dim;
        for (std::size_t r = seg.bags[j].begin; r < seg.bags[j].end; ++r) {
            const double* in = token_embs.data.data() + r * token_embs.dim;
            for (std::size_t c = 0; c < token_embs.dim; ++c) o[c] += in[c];
        }
    }
    if (renormalize) return l2_normalize_rows(out);
    return out;
}

ClsAndBags bag_cls_passthrough(const EmbeddingMatrix& token_embs,
                               const BagSegmentation& seg, bool renormalize) {
    if (token_embs.rows == 0)
        raise(ErrorCode::EmptyInput, "need at least the CLS row");
    ClsAndBags out;
    out.cls.assign(token_embs.row(0).begin(), token_embs.row(0).end());
    EmbeddingMatrix rest(token_embs.rows - 1, token_embs.dim);
    std::copy(token_embs.data.begin() + token_embs.dim, token_embs.data.end(),
              rest.data.begin());
    rest.normalized = token_embs.normalized;
    out.bags = aggregate_bags(rest, seg, renormalize);
    return out;
}

} // namespace bagf
