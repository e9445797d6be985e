#ifndef AAR_DENSE_INDEX_HPP
#define AAR_DENSE_INDEX_HPP

#include "aar/common.hpp"
#include "aar/embedding_store.hpp"

#include <json.hpp>

#include <span>
#include <string>
#include <vector>

namespace aar {

struct Candidate {
  Index passage_row = 0;
  float score = 0.f;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Sorted by score descending, ties by ascending row.
struct CandidatePool {
  std::string query_id;
  std::vector<Candidate> candidates;
};

/// Strict weak order used by every ranking stage.
template <typename Score>
bool ranks_before(Score a_score, Index a_row, Score b_score, Index b_row) {
  if (a_score != b_score) return a_score > b_score;
  return a_row < b_row;
}

/// Exact top-k inner product search.
CandidatePool top_k(std::span<const float> query, const EmbeddingMatrix& passages, Index k,
                    std::string query_id = {});

/// One pool per query row, in query order. `threads == 0` picks hardware concurrency.
std::vector<CandidatePool> batch_top_k(const EmbeddingMatrix& queries,
                                       const EmbeddingMatrix& passages, Index k,
                                       unsigned threads = 1);

/// {"query_id", "ids", "scores"}
nlohmann::json pool_to_json(const CandidatePool& pool, const EmbeddingMatrix& passages);

}  // namespace aar

#endif  // AAR_DENSE_INDEX_HPP
