#include "aar/reranker.hpp"

#include <algorithm>

namespace aar {

ScoringMode parse_scoring_mode(const std::string& s) {
  if (s == "forward_only") return ScoringMode::ForwardOnly;
  if (s == "reverse_only") return ScoringMode::ReverseOnly;
  if (s == "both_transformed") return ScoringMode::BothTransformed;
  if (s == "mixed_bidi") return ScoringMode::MixedBidi;
  throw Error(ErrorKind::InvalidArgument, "unknown scoring mode '" + s + "'");
}

const char* to_string(ScoringMode m) {
  switch (m) {
    case ScoringMode::ForwardOnly: return "forward_only";
    case ScoringMode::ReverseOnly: return "reverse_only";
    case ScoringMode::BothTransformed: return "both_transformed";
    case ScoringMode::MixedBidi: return "mixed_bidi";
  }
  return "unknown";
}

void RerankConfig::validate() const {
  if (!(lambda >= 0 && lambda <= 1)) {
    throw Error(ErrorKind::InvalidArgument, "lambda must be in [0, 1]");
  }
  if (pool_depth < 1) throw Error(ErrorKind::InvalidArgument, "pool_depth must be >= 1");
  if (cutoff < 1 || cutoff > pool_depth) {
    throw Error(ErrorKind::InvalidArgument, "cutoff must be in [1, pool_depth]");
  }
}

namespace {

void require_dim(std::size_t got, std::size_t want) {
  if (got != want) {
    throw Error(ErrorKind::DimMismatch,
                "vector dim " + std::to_string(got) + " != " + std::to_string(want));
  }
}

}  // namespace

float association_score(std::span<const float> fq, std::span<const float> q,
                        std::span<const float> p, std::span<const float> fp, ScoringMode mode) {
  const std::size_t d = q.size();
  require_dim(fq.size(), d);
  require_dim(p.size(), d);
  require_dim(fp.size(), d);
  switch (mode) {
    case ScoringMode::ForwardOnly: return dot_f32(fq.data(), p.data(), d);
    case ScoringMode::ReverseOnly: return dot_f32(fp.data(), q.data(), d);
    case ScoringMode::BothTransformed: return dot_f32(fq.data(), fp.data(), d);
    case ScoringMode::MixedBidi:
      return 0.5f * (dot_f32(fq.data(), p.data(), d) + dot_f32(fp.data(), q.data(), d));
  }
  return 0.f;
}

float association_score(const AssocModelF& model, std::span<const float> q,
                        std::span<const float> p, std::span<const float> p_transformed,
                        ScoringMode mode) {
  require_dim(q.size(), static_cast<std::size_t>(model.dim()));
  const auto fq = forward(model, Eigen::Map<const Vector<float>>(q.data(), model.dim())).output;
  return association_score({fq.data(), q.size()}, q, p, p_transformed, mode);
}

std::vector<RankedCandidate> blend_and_rerank(const CandidatePool& pool,
                                              std::span<const float> assoc_scores, double lambda,
                                              Index cutoff) {
  if (assoc_scores.size() != pool.candidates.size()) {
    throw Error(ErrorKind::InvalidArgument,
                "association scores (" + std::to_string(assoc_scores.size()) +
                    ") do not match pool size (" + std::to_string(pool.candidates.size()) + ")");
  }
  if (!(lambda >= 0 && lambda <= 1)) {
    throw Error(ErrorKind::InvalidArgument, "lambda must be in [0, 1]");
  }
  if (cutoff < 0) throw Error(ErrorKind::InvalidArgument, "cutoff must be >= 0");
  std::vector<RankedCandidate> out;
  out.reserve(pool.candidates.size());
  for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
    const auto& c = pool.candidates[i];
    const double blended = (1.0 - lambda) * static_cast<double>(c.score) +
                           lambda * static_cast<double>(assoc_scores[i]);
    out.push_back({c.passage_row, c.score, assoc_scores[i], blended});
  }
  std::sort(out.begin(), out.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
    return ranks_before(a.blended, a.passage_row, b.blended, b.passage_row);
  });
  if (static_cast<Index>(out.size()) > cutoff) out.resize(static_cast<std::size_t>(cutoff));
  return out;
}

std::vector<RankedCandidate> blend_and_rerank(const CandidatePool& pool,
                                              std::span<const float> assoc_scores,
                                              const RerankConfig& config) {
  return blend_and_rerank(pool, assoc_scores, config.lambda, config.cutoff);
}

std::vector<float> association_scores(const CandidatePool& pool, std::span<const float> fq,
                                      std::span<const float> q, const EmbeddingMatrix& passages,
                                      const EmbeddingMatrix& transformed, ScoringMode mode) {
  if (transformed.rows() != passages.rows() || transformed.dim() != passages.dim()) {
    throw Error(ErrorKind::DimMismatch, "transformed matrix does not match passages");
  }
  std::vector<float> scores;
  scores.reserve(pool.candidates.size());
  for (const auto& c : pool.candidates) {
    scores.push_back(association_score(fq, q, passages.row(c.passage_row),
                                       transformed.row(c.passage_row), mode));
  }
  return scores;
}

std::vector<RankedCandidate> rerank_query(const std::string& query_id,
                                          std::span<const float> query,
                                          const EmbeddingMatrix& passages,
                                          const EmbeddingMatrix& transformed,
                                          const AssocModelF& model, const RerankConfig& config) {
  config.validate();
  const CandidatePool pool = top_k(query, passages, config.pool_depth, query_id);
  require_dim(query.size(), static_cast<std::size_t>(model.dim()));
  const auto fq =
      forward(model, Eigen::Map<const Vector<float>>(query.data(), model.dim())).output;
  const auto scores = association_scores(pool, {fq.data(), static_cast<std::size_t>(fq.size())},
                                         query, passages, transformed, config.mode);
  return blend_and_rerank(pool, scores, config);
}

nlohmann::json ranking_to_json(const std::string& query_id,
                               const std::vector<RankedCandidate>& ranking,
                               const EmbeddingMatrix& passages) {
  nlohmann::json ids = nlohmann::json::array(), sim = nlohmann::json::array(),
                 assoc = nlohmann::json::array(), blended = nlohmann::json::array();
  for (const auto& r : ranking) {
    ids.push_back(passages.ids.id(r.passage_row));
    sim.push_back(r.sim);
    assoc.push_back(r.assoc);
    blended.push_back(r.blended);
  }
  return {{"query_id", query_id}, {"ids", ids}, {"sim", sim}, {"assoc", assoc},
          {"blended", blended}};
}

}  // namespace aar
