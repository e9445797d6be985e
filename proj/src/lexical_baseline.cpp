#include "aar/lexical_baseline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace aar {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char ch : text) {
    if (std::isalnum(ch)) {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

double LexicalIndex::idf(const std::string& term) const {
  auto it = doc_freqs.find(term);
  if (it == doc_freqs.end()) return 0.0;
  const double n = static_cast<double>(size());
  const double df = it->second;
  return std::max(0.0, std::log((n - df + 0.5) / (df + 0.5)));
}

LexicalIndex build_lexical_index(const std::vector<std::pair<std::string, std::string>>& passages,
                                 double k1, double b) {
  if (passages.empty()) throw Error(ErrorKind::InvalidArgument, "empty corpus");
  if (!(k1 > 0) || !(b >= 0 && b <= 1)) {
    throw Error(ErrorKind::InvalidArgument, "BM25 needs k1 > 0 and b in [0, 1]");
  }
  LexicalIndex index;
  index.k1 = k1;
  index.b = b;
  double total_len = 0;
  for (const auto& [id, text] : passages) {
    const auto tokens = tokenize(text);
    if (tokens.empty()) {
      throw Error(ErrorKind::InvalidArgument, "passage '" + id + "' has no tokens");
    }
    if (!index.row_of.emplace(id, index.size()).second) {
      throw Error(ErrorKind::DuplicateId, "duplicate passage id '" + id + "'");
    }
    index.passage_ids.push_back(id);
    auto& tf = index.term_freqs.emplace_back();
    for (const auto& t : tokens) ++tf[t];
    for (const auto& [t, _] : tf) ++index.doc_freqs[t];
    index.doc_lengths.push_back(static_cast<int>(tokens.size()));
    total_len += static_cast<double>(tokens.size());
  }
  index.avg_doc_length = total_len / static_cast<double>(passages.size());
  return index;
}

double bm25_score(const LexicalIndex& index, const std::string& query_text,
                  const std::string& passage_id) {
  auto row = index.row_of.find(passage_id);
  if (row == index.row_of.end()) {
    throw Error(ErrorKind::UnknownId, "passage '" + passage_id + "' is not indexed");
  }
  const auto& tf = index.term_freqs[static_cast<std::size_t>(row->second)];
  const double len_norm =
      1.0 - index.b + index.b * index.doc_lengths[static_cast<std::size_t>(row->second)] /
                          index.avg_doc_length;
  double score = 0;
  for (const auto& term : tokenize(query_text)) {
    auto it = tf.find(term);
    if (it == tf.end()) continue;
    const double f = it->second;
    score += index.idf(term) * f * (index.k1 + 1.0) / (f + index.k1 * len_norm);
  }
  return score;
}

std::vector<RankedCandidate> bm25_rerank(const CandidatePool& pool, const std::string& query_text,
                                         const LexicalIndex& index,
                                         const EmbeddingMatrix& passages, double lambda, Index k) {
  std::vector<double> raw;
  raw.reserve(pool.candidates.size());
  for (const auto& c : pool.candidates) {
    raw.push_back(bm25_score(index, query_text, passages.ids.id(c.passage_row)));
  }
  std::vector<float> normalized(raw.size(), 0.f);
  if (!raw.empty()) {
    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    if (*hi > *lo) {
      for (std::size_t i = 0; i < raw.size(); ++i) {
        normalized[i] = static_cast<float>((raw[i] - *lo) / (*hi - *lo));
      }
    }
  }
  return blend_and_rerank(pool, normalized, lambda, k);
}

}  // namespace aar
