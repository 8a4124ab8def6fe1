#pragma once

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bagf/bagging.hpp"
#include "bagf/contrastive.hpp"
#include "bagf/retrieval.hpp"
#include "bagf/similarity.hpp"

namespace bagf {

// One named embedding matrix with per-row validity, as stored on disk.
struct EmbeddingRecord {
    std::string id;
    EmbeddingMatrix matrix;
    PaddingMask mask;
};

// Binary embedding container.
//
//   magic   "BAGF"
//   version u16 little-endian (currently 1)
//   dtype   u8 (1 = f32; anything else is rejected)
//   dim     u32
//   items   u32
//   per item:
//     id_len u16, id bytes (UTF-8)
//     rows   u32
//     rows*dim f32 payload, row-major little-endian
//     ceil(rows/8) validity bitmap bytes, LSB-first (1 = valid row)
//
// Values are widened to f64 on load; writing narrows to f32, so a
// write -> read -> write cycle is byte-identical.
struct EmbeddingFile {
    std::vector<EmbeddingRecord> records;

    std::size_t dim() const;
    const EmbeddingRecord* find(const std::string& id) const;
};

void write_embedding_file(const std::string& path, const EmbeddingFile& file);
EmbeddingFile read_embedding_file(const std::string& path);

// Vocabulary file: UTF-8 text, one entry per line, whitespace-separated
// integer token ids. Lines beginning with '#' and blank lines are ignored.
void write_vocabulary_file(const std::string& path, const Vocabulary& vocab);
Vocabulary read_vocabulary_file(const std::string& path);

// Token-sequence file: same line format as the vocabulary file; one sequence
// per line, paired with embedding records by line order where relevant.
void write_token_file(const std::string& path,
                      const std::vector<std::vector<TokenId>>& sequences);
std::vector<std::vector<TokenId>> read_token_file(const std::string& path);

// Bagging-helper file: "BAGH 1" header line followed by vocabulary lines.
void write_helper_file(const std::string& path, const Vocabulary& vocab);
Vocabulary read_helper_file(const std::string& path);

// Qrels: JSON Lines, one object per query: {"query": id, "relevant": [ids]}.
void write_qrels_file(const std::string& path,
                      const std::map<std::string, std::set<std::string>>& qrels);
std::map<std::string, std::set<std::string>> read_qrels_file(const std::string& path);

// Results: JSON Lines {"query": id, "ranking": [[id, score], ...]}.
void write_results_file(const std::string& path,
                        const std::vector<RankedList>& results);
std::vector<RankedList> read_results_file(const std::string& path);

// Loss curve CSV with header "epoch,l_itc,l_bwc,tau".
void write_loss_csv(const std::string& path, const std::vector<EpochStats>& curve);

// Similarity matrix CSV: header "query,<cand ids...>", one row per query.
void write_similarity_csv(std::ostream& out, const SimilarityMatrix& matrix,
                          const std::vector<std::string>& query_ids,
                          const std::vector<std::string>& candidate_ids);

// Plain-text PGM (P2), min-max scaled to 0..255 per map, plus a sidecar
// text file of raw values at <path_prefix>.txt.
void write_heatmap_pgm(const std::string& path_prefix, const HeatMap& map);

} // namespace bagf
