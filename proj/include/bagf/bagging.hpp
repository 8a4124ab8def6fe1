#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "bagf/embedding.hpp"

namespace bagf {

using TokenId = std::int32_t;

// Entity/phrase lexicon, stored pre-tokenized. Tokenizer training is out of
// scope; the engine consumes token ids only.
struct Vocabulary {
    std::vector<std::vector<TokenId>> sequences;

    void add(std::vector<TokenId> sequence);   // rejects empty sequences
    std::size_t size() const { return sequences.size(); }
    bool empty() const { return sequences.empty(); }
};

// Trie over vocabulary token sequences with terminal markers. Immutable once
// built; shareable across threads. A default-constructed helper has an empty
// lexicon, under which every token segments into its own bag.
class BaggingHelper {
public:
    BaggingHelper() : nodes_(1) {}

    std::size_t vocab_size() const { return vocab_size_; }

    bool contains(std::span<const TokenId> sequence) const;

    // Length of the longest vocabulary entry matching tokens[start..).
    // Returns 0 when no entry matches at that position.
    std::size_t longest_match(std::span<const TokenId> tokens,
                              std::size_t start) const;

    // DuplicateEntry if the sequence is already present; EmptyInput if empty.
    void insert(std::span<const TokenId> sequence);

private:
    struct Node {
        std::unordered_map<TokenId, std::uint32_t> next;
        bool terminal = false;
    };
    std::vector<Node> nodes_;   // nodes_[0] is the root
    std::size_t vocab_size_ = 0;
};

// Contiguous half-open token-index range [begin, end).
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
    bool operator==(const TokenSpan&) const = default;
};

// Partition of a token-index sequence into contiguous bags. Spans are in
// order, non-overlapping and cover [0, total_tokens) exactly; offsets[j] is
// the start of bag j in the flattened sequence.
struct BagSegmentation {
    std::vector<TokenSpan> bags;
    std::vector<std::size_t> offsets;
    std::size_t total_tokens = 0;

    std::size_t bag_count() const { return bags.size(); }
};

// Compiles the vocabulary into a trie. EmptyVocabulary if vocab is empty;
// DuplicateEntry if two entries share a token sequence.
BaggingHelper build_helper(const Vocabulary& vocab);

// Greedy longest-match segmentation, left to right. Tokens that start no
// vocabulary match become singleton bags, so segmentation is total.
// EmptyInput if tokens is empty.
BagSegmentation segment(std::span<const TokenId> tokens,
                        const BaggingHelper& helper);

// Sums token embeddings within each bag; row j of the result is bag j.
// With renormalize set, summed rows are L2-normalized afterwards (ZeroRow if
// a bag sums to zero). CoverageMismatch if seg does not cover the rows.
EmbeddingMatrix aggregate_bags(const EmbeddingMatrix& token_embs,
                               const BagSegmentation& seg, bool renormalize);

struct ClsAndBags {
    std::vector<double> cls;   // row 0 of the input, passed through untouched
    EmbeddingMatrix bags;
};

// Splits off the CLS row (its own bag, never summed with others) and bags the
// remaining rows per seg, which must cover rows 1..end.
ClsAndBags bag_cls_passthrough(const EmbeddingMatrix& token_embs,
                               const BagSegmentation& seg, bool renormalize);

} // namespace bagf
