#ifndef AAR_EVALUATION_HPP
#define AAR_EVALUATION_HPP

#include "aar/assoc_model.hpp"
#include "aar/common.hpp"
#include "aar/dense_index.hpp"
#include "aar/embedding_store.hpp"
#include "aar/pair_data.hpp"
#include "aar/reranker.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace aar {

// ---------------------------------------------------------------------------
// Per-question metrics

/// |gold ∩ top-k| / |gold|. Throws on empty gold.
double recall_at_k(const std::vector<std::string>& ranked, const std::vector<std::string>& gold,
                   Index k);

/// Lowercase, drop ASCII punctuation, drop the tokens "a", "an", "the",
/// collapse whitespace.
std::string qa_normalize(std::string_view text);

/// True iff the normalized answer occurs in one of the first k normalized
/// texts. Throws when the answer normalizes to "".
bool coverage_at_k(const std::vector<std::string>& ranked_texts, const std::string& answer,
                   Index k);

struct QaScore {
  int em = 0;
  double f1 = 0;
};

/// Exact match and multiset token F1 on normalized strings.
QaScore em_and_f1(const std::string& prediction, const std::string& gold);

/// Linear-interpolation percentile of sorted data, q in [0, 1].
double percentile_sorted(std::span<const double> sorted, double q);

struct ConfidenceInterval {
  double lower = 0;
  double upper = 0;
};

/// Percentile bootstrap of the mean: `resamples` draws of n values with
/// replacement, returning the 2.5th and 97.5th percentiles of the means.
ConfidenceInterval paired_bootstrap_ci(std::span<const double> deltas,
                                       std::size_t resamples = 10000, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Rankings

/// 1-based rank of each gold passage in one system's ranked list; nullopt when
/// the passage is not in the list.
struct QuestionRanks {
  std::string question_id;
  std::vector<std::optional<Index>> gold_ranks;

  double recall(Index k) const;
};

using SystemRanks = std::vector<QuestionRanks>;

SystemRanks ranks_from_rankings(const std::vector<std::string>& question_ids,
                                const std::vector<std::vector<Index>>& rankings,
                                const std::vector<std::vector<Index>>& gold_rows);

double mean_recall(const SystemRanks& ranks, Index k);

struct EasyHardSplit {
  std::vector<std::size_t> easy;  // indices into the report
  std::vector<std::size_t> hard;
};

/// Easy questions have every gold passage in the baseline top 5.
EasyHardSplit easy_hard_split(const SystemRanks& baseline);

struct RescuedQuestion {
  std::string question_id;
  std::vector<std::pair<std::optional<Index>, std::optional<Index>>> movement;  // dense -> rerank
};

struct RankMovementReport {
  std::vector<RescuedQuestion> rescued_table;
  std::size_t rescued = 0;
  std::size_t regressed = 0;
  std::size_t unchanged_hit = 0;
  std::size_t unchanged_miss = 0;
  /// Share of unchanged misses with a gold passage outside the candidate pool.
  double miss_outside_pool_fraction = 0;
};

/// "Hit" means every gold passage in the top 5. The baseline list must be the
/// full candidate pool so that an absent rank means "outside the pool".
RankMovementReport rank_movement_report(const SystemRanks& baseline, const SystemRanks& rerank);

nlohmann::json to_json(const RankMovementReport& r);

// ---------------------------------------------------------------------------
// Pipeline evaluation

struct EvalQuestion {
  std::string question_id;
  Index query_row = 0;
  std::vector<Index> gold_rows;
  std::string answer;
};

/// Joins records to query rows (by question id) and gold ids to passage rows.
/// Records whose question is missing from `queries` are an error.
std::vector<EvalQuestion> make_eval_questions(const std::vector<QuestionRecord>& records,
                                               const EmbeddingMatrix& queries,
                                               const EmbeddingMatrix& passages);

/// Precomputes, once per question, the depth-`max_depth` dense pool and the
/// lambda-independent association scores; every sweep reuses them.
class EvalContext {
 public:
  EvalContext(const EmbeddingMatrix& passages, const EmbeddingMatrix& transformed,
              const AssocModelF& model, const EmbeddingMatrix& queries,
              std::vector<EvalQuestion> questions, Index max_depth, ScoringMode mode);

  std::size_t size() const { return questions_.size(); }
  Index max_depth() const { return max_depth_; }
  const std::vector<EvalQuestion>& questions() const { return questions_; }

  /// Dense order truncated to `depth` (a prefix of the max-depth pool).
  std::vector<std::vector<Index>> dense_rankings(Index depth) const;
  /// Rerank of the depth-`depth` pool with the given lambda, full pool length.
  std::vector<std::vector<Index>> rerank_rankings(double lambda, Index depth) const;
  std::vector<std::vector<Index>> rerank_rankings(double lambda) const {
    return rerank_rankings(lambda, max_depth_);
  }

  SystemRanks ranks(const std::vector<std::vector<Index>>& rankings) const;

 private:
  const EmbeddingMatrix& passages_;
  std::vector<EvalQuestion> questions_;
  Index max_depth_;
  std::vector<CandidatePool> pools_;
  std::vector<std::vector<float>> assoc_;
};

struct SweepRow {
  double key = 0;  // lambda or depth
  std::vector<std::pair<Index, double>> recall;  // (k, R@k)
  double pool_recall = 0;                        // gold share inside the pool
};

std::vector<SweepRow> lambda_sweep(const EvalContext& ctx, const std::vector<double>& lambdas,
                                   const std::vector<Index>& ks = {5, 10, 20});

/// Depths must not exceed ctx.max_depth(). Uses the lambda given.
std::vector<SweepRow> pool_depth_sweep(const EvalContext& ctx, const std::vector<Index>& depths,
                                       double lambda, const std::vector<Index>& ks = {5, 10, 20});

std::string sweep_to_csv(const std::vector<SweepRow>& rows, const std::string& key_name);

struct EvalOptions {
  double lambda = 0.5;
  std::vector<Index> ks = {1, 2, 5, 10, 20};
  std::vector<Index> coverage_ks = {3, 5, 10, 20};
  std::size_t bootstrap_resamples = 10000;
  std::uint64_t bootstrap_seed = 0;
  bool per_question = true;
};

/// Full report: R@k and Coverage@k for dense and reranked systems, R@5 delta
/// with bootstrap CI, easy/hard breakdown, rank movement. `passage_texts`, when
/// non-empty, is row-aligned with the passages.
nlohmann::json evaluate(const EvalContext& ctx, const EvalOptions& options,
                        const std::vector<std::string>& passage_texts = {});

struct QaPrediction {
  std::string question_id;
  std::string prediction;
};

std::vector<QaPrediction> load_predictions(const std::filesystem::path& path);

/// Mean EM/F1 over predictions whose question has a gold answer; with a second
/// system, paired deltas and bootstrap CIs.
nlohmann::json qa_report(const std::vector<QuestionRecord>& records,
                         const std::vector<QaPrediction>& system,
                         const std::vector<QaPrediction>* baseline, std::size_t resamples,
                         std::uint64_t seed);

// ---------------------------------------------------------------------------
// Latency

struct LatencyComponent {
  std::string name;
  double mean_ms = 0;
  double p95_ms = 0;
};

struct LatencyStats {
  Index pool_depth = 0;
  std::size_t samples = 0;
  /// candidate_retrieval, query_transform, association_scoring, total.
  std::vector<LatencyComponent> components;

  const LatencyComponent& component(const std::string& name) const;
};

LatencyStats summarize_latency(Index pool_depth, const std::vector<std::vector<double>>& samples_ms,
                               const std::vector<std::string>& names);

/// Times each query single-threaded: dense top-K, f(query), then per-candidate
/// association scoring with blend and sort. Component times are consecutive
/// intervals of one clock, so total is their sum.
LatencyStats latency_bench(const EmbeddingMatrix& passages, const EmbeddingMatrix& transformed,
                           const AssocModelF& model, const EmbeddingMatrix& queries,
                           const RerankConfig& config, int warmup, int reps);

/// Same measurement for several configurations, interleaved per query; one
/// result per configuration.
std::vector<LatencyStats> latency_bench(const EmbeddingMatrix& passages,
                                       const EmbeddingMatrix& transformed,
                                       const AssocModelF& model, const EmbeddingMatrix& queries,
                                       const std::vector<RerankConfig>& configs, int warmup,
                                       int reps);

nlohmann::json to_json(const LatencyStats& s);

}  // namespace aar

#endif  // AAR_EVALUATION_HPP
