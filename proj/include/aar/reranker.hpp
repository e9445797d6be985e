#ifndef AAR_RERANKER_HPP
#define AAR_RERANKER_HPP

#include "aar/assoc_model.hpp"
#include "aar/common.hpp"
#include "aar/dense_index.hpp"
#include "aar/embedding_store.hpp"

#include <json.hpp>

#include <span>
#include <string>
#include <vector>

namespace aar {

enum class ScoringMode { ForwardOnly, ReverseOnly, BothTransformed, MixedBidi };
ScoringMode parse_scoring_mode(const std::string& s);
const char* to_string(ScoringMode m);
inline constexpr ScoringMode kAllScoringModes[] = {ScoringMode::ForwardOnly,
                                                   ScoringMode::ReverseOnly,
                                                   ScoringMode::BothTransformed,
                                                   ScoringMode::MixedBidi};

struct RerankConfig {
  double lambda = 0.5;
  Index pool_depth = 100;
  Index cutoff = 20;
  ScoringMode mode = ScoringMode::MixedBidi;

  void validate() const;
};

/// Association score from precomputed pieces:
///
///   forward_only     f(q) . p
///   reverse_only     f(p) . q
///   both_transformed f(q) . f(p)
///   mixed_bidi       (f(q) . p + f(p) . q) / 2
float association_score(std::span<const float> fq, std::span<const float> q,
                        std::span<const float> p, std::span<const float> fp, ScoringMode mode);

/// Same, computing f(q) on the fly.
float association_score(const AssocModelF& model, std::span<const float> q,
                        std::span<const float> p, std::span<const float> p_transformed,
                        ScoringMode mode);

struct RankedCandidate {
  Index passage_row = 0;
  float sim = 0;
  float assoc = 0;
  double blended = 0;
};

/// Rescore with (1 - lambda) sim + lambda assoc, re-sort (ties by row), keep
/// the first `cutoff`.
std::vector<RankedCandidate> blend_and_rerank(const CandidatePool& pool,
                                              std::span<const float> assoc_scores, double lambda,
                                              Index cutoff);
std::vector<RankedCandidate> blend_and_rerank(const CandidatePool& pool,
                                              std::span<const float> assoc_scores,
                                              const RerankConfig& config);

/// Score every pool member; the result lines up with pool.candidates.
std::vector<float> association_scores(const CandidatePool& pool, std::span<const float> fq,
                                      std::span<const float> q, const EmbeddingMatrix& passages,
                                      const EmbeddingMatrix& transformed, ScoringMode mode);

/// Dense top-K, one forward pass for the query, K association scores, blend.
std::vector<RankedCandidate> rerank_query(const std::string& query_id,
                                          std::span<const float> query,
                                          const EmbeddingMatrix& passages,
                                          const EmbeddingMatrix& transformed,
                                          const AssocModelF& model, const RerankConfig& config);

/// {"query_id", "ids", "sim", "assoc", "blended"}
nlohmann::json ranking_to_json(const std::string& query_id,
                               const std::vector<RankedCandidate>& ranking,
                               const EmbeddingMatrix& passages);

}  // namespace aar

#endif  // AAR_RERANKER_HPP
