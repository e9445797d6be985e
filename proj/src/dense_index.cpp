#include "aar/dense_index.hpp"

#include <algorithm>
#include <thread>

namespace aar {

CandidatePool top_k(std::span<const float> query, const EmbeddingMatrix& passages, Index k,
                    std::string query_id) {
  const Index n = passages.rows();
  const Index d = passages.dim();
  if (static_cast<Index>(query.size()) != d) {
    throw Error(ErrorKind::DimMismatch, "query dim " + std::to_string(query.size()) +
                                            " != passage dim " + std::to_string(d));
  }
  if (k < 1 || k > n) {
    throw Error(ErrorKind::OutOfRange,
                "k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }

  std::vector<Candidate> all(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    all[i] = {i, dot_f32(query.data(), passages.row(i).data(), static_cast<std::size_t>(d))};
  }
  auto before = [](const Candidate& a, const Candidate& b) {
    return ranks_before(a.score, a.passage_row, b.score, b.passage_row);
  };
  std::partial_sort(all.begin(), all.begin() + k, all.end(), before);
  all.resize(static_cast<std::size_t>(k));
  return {std::move(query_id), std::move(all)};
}

std::vector<CandidatePool> batch_top_k(const EmbeddingMatrix& queries,
                                       const EmbeddingMatrix& passages, Index k,
                                       unsigned threads) {
  const Index nq = queries.rows();
  std::vector<CandidatePool> pools(static_cast<std::size_t>(nq));
  if (nq == 0) return pools;
  if (queries.dim() != passages.dim()) {
    throw Error(ErrorKind::DimMismatch, "query dim " + std::to_string(queries.dim()) +
                                            " != passage dim " + std::to_string(passages.dim()));
  }
  if (k < 1 || k > passages.rows()) {
    throw Error(ErrorKind::OutOfRange, "k=" + std::to_string(k) + " outside [1, " +
                                           std::to_string(passages.rows()) + "]");
  }
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<Index>(threads, nq));

  // Each worker owns a strided slice of the output, so order never depends on scheduling.
  auto work = [&](unsigned t) {
    for (Index q = t; q < nq; q += threads) {
      pools[q] = top_k(queries.row(q), passages, k, queries.ids.id(q));
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> workers;
    for (unsigned t = 0; t < threads; ++t) workers.emplace_back(work, t);
  }
  return pools;
}

nlohmann::json pool_to_json(const CandidatePool& pool, const EmbeddingMatrix& passages) {
  nlohmann::json ids = nlohmann::json::array();
  nlohmann::json scores = nlohmann::json::array();
  for (const auto& c : pool.candidates) {
    ids.push_back(passages.ids.id(c.passage_row));
    scores.push_back(c.score);
  }
  return {{"query_id", pool.query_id}, {"ids", ids}, {"scores", scores}};
}

}  // namespace aar
