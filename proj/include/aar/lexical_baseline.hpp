#ifndef AAR_LEXICAL_BASELINE_HPP
#define AAR_LEXICAL_BASELINE_HPP

#include "aar/common.hpp"
#include "aar/dense_index.hpp"
#include "aar/reranker.hpp"

#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace aar {

/// Lowercased maximal runs of ASCII alphanumerics.
std::vector<std::string> tokenize(std::string_view text);

/// Okapi BM25 statistics over a passage collection.
struct LexicalIndex {
  std::vector<std::string> passage_ids;
  std::unordered_map<std::string, Index> row_of;
  std::vector<std::unordered_map<std::string, int>> term_freqs;
  std::vector<int> doc_lengths;
  double avg_doc_length = 0;
  std::unordered_map<std::string, int> doc_freqs;
  double k1 = 1.2;
  double b = 0.75;

  Index size() const { return static_cast<Index>(passage_ids.size()); }
  /// max(0, ln((N - df + 0.5) / (df + 0.5))); 0 for unseen terms.
  double idf(const std::string& term) const;
};

/// Entries are (id, text) in corpus order.
LexicalIndex build_lexical_index(const std::vector<std::pair<std::string, std::string>>& passages,
                                 double k1 = 1.2, double b = 0.75);

/// Sum over query tokens (repeats included) of
/// idf * tf (k1 + 1) / (tf + k1 (1 - b + b len / avg_len)).
double bm25_score(const LexicalIndex& index, const std::string& query_text,
                  const std::string& passage_id);

/// BM25 over the pool, min-max normalized within the pool (all zero when
/// constant), then blended with the dense score exactly like the association
/// rerank.
std::vector<RankedCandidate> bm25_rerank(const CandidatePool& pool, const std::string& query_text,
                                         const LexicalIndex& index,
                                         const EmbeddingMatrix& passages, double lambda, Index k);

}  // namespace aar

#endif  // AAR_LEXICAL_BASELINE_HPP
