#include "aar/evaluation.hpp"

#include "aar/io.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace aar {

double recall_at_k(const std::vector<std::string>& ranked, const std::vector<std::string>& gold,
                   Index k) {
  if (gold.empty()) throw Error(ErrorKind::InvalidArgument, "recall_at_k needs non-empty gold");
  const std::unordered_set<std::string> gold_set(gold.begin(), gold.end());
  std::unordered_set<std::string> found;
  const std::size_t limit = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(std::max<Index>(k, 0)));
  for (std::size_t i = 0; i < limit; ++i) {
    if (gold_set.count(ranked[i])) found.insert(ranked[i]);
  }
  return static_cast<double>(found.size()) / static_cast<double>(gold_set.size());
}

namespace {

std::vector<std::string> normalized_tokens(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (unsigned char ch : text) {
    if (ch < 128 && std::ispunct(ch)) continue;
    cleaned.push_back(ch < 128 ? static_cast<char>(std::tolower(ch)) : static_cast<char>(ch));
  }
  std::vector<std::string> tokens;
  std::istringstream in(cleaned);
  std::string tok;
  while (in >> tok) {
    if (tok == "a" || tok == "an" || tok == "the") continue;
    tokens.push_back(tok);
  }
  return tokens;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

}  // namespace

std::string qa_normalize(std::string_view text) { return join(normalized_tokens(text)); }

bool coverage_at_k(const std::vector<std::string>& ranked_texts, const std::string& answer,
                   Index k) {
  const std::string needle = qa_normalize(answer);
  if (needle.empty()) {
    throw Error(ErrorKind::InvalidArgument, "answer '" + answer + "' normalizes to empty");
  }
  const std::size_t limit =
      std::min<std::size_t>(ranked_texts.size(), static_cast<std::size_t>(std::max<Index>(k, 0)));
  for (std::size_t i = 0; i < limit; ++i) {
    if (qa_normalize(ranked_texts[i]).find(needle) != std::string::npos) return true;
  }
  return false;
}

QaScore em_and_f1(const std::string& prediction, const std::string& gold) {
  const auto p = normalized_tokens(prediction);
  const auto g = normalized_tokens(gold);
  if (p.empty() && g.empty()) return {1, 1.0};
  if (p.empty() || g.empty()) return {0, 0.0};
  QaScore s;
  s.em = join(p) == join(g) ? 1 : 0;
  std::map<std::string, int> gold_counts;
  for (const auto& t : g) ++gold_counts[t];
  int common = 0;
  for (const auto& t : p) {
    auto it = gold_counts.find(t);
    if (it != gold_counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return s;
  const double precision = static_cast<double>(common) / static_cast<double>(p.size());
  const double recall = static_cast<double>(common) / static_cast<double>(g.size());
  s.f1 = 2 * precision * recall / (precision + recall);
  return s;
}

double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorKind::InvalidArgument, "percentile of empty data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0 || sorted[lo] == sorted[hi]) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

ConfidenceInterval paired_bootstrap_ci(std::span<const double> deltas, std::size_t resamples,
                                       std::uint64_t seed) {
  if (deltas.empty()) throw Error(ErrorKind::InvalidArgument, "bootstrap needs at least 1 delta");
  if (resamples == 0) throw Error(ErrorKind::InvalidArgument, "bootstrap needs resamples >= 1");
  const std::size_t n = deltas.size();
  // Means are taken relative to the first value so a constant input is exact.
  const double ref = deltas[0];
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) sum += deltas[pick(rng)] - ref;
    m = ref + sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  return {percentile_sorted(means, 0.025), percentile_sorted(means, 0.975)};
}

double QuestionRanks::recall(Index k) const {
  if (gold_ranks.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& r : gold_ranks) hit += (r && *r <= k) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(gold_ranks.size());
}

SystemRanks ranks_from_rankings(const std::vector<std::string>& question_ids,
                                const std::vector<std::vector<Index>>& rankings,
                                const std::vector<std::vector<Index>>& gold_rows) {
  if (question_ids.size() != rankings.size() || rankings.size() != gold_rows.size()) {
    throw Error(ErrorKind::InvalidArgument, "ranking inputs differ in length");
  }
  SystemRanks out(rankings.size());
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    std::unordered_map<Index, Index> position;
    for (std::size_t i = 0; i < rankings[q].size(); ++i) {
      position.emplace(rankings[q][i], static_cast<Index>(i) + 1);
    }
    out[q].question_id = question_ids[q];
    for (Index g : gold_rows[q]) {
      auto it = position.find(g);
      out[q].gold_ranks.push_back(it == position.end() ? std::nullopt
                                                       : std::optional<Index>(it->second));
    }
  }
  return out;
}

double mean_recall(const SystemRanks& ranks, Index k) {
  if (ranks.empty()) return 0.0;
  double sum = 0;
  for (const auto& q : ranks) sum += q.recall(k);
  return sum / static_cast<double>(ranks.size());
}

EasyHardSplit easy_hard_split(const SystemRanks& baseline) {
  EasyHardSplit split;
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    (baseline[i].recall(5) == 1.0 ? split.easy : split.hard).push_back(i);
  }
  return split;
}

RankMovementReport rank_movement_report(const SystemRanks& baseline, const SystemRanks& rerank) {
  if (baseline.size() != rerank.size()) {
    throw Error(ErrorKind::InvalidArgument, "reports cover different question counts");
  }
  RankMovementReport r;
  std::size_t miss_outside = 0;
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    const auto& b = baseline[i];
    const auto& a = rerank[i];
    if (b.question_id != a.question_id || b.gold_ranks.size() != a.gold_ranks.size()) {
      throw Error(ErrorKind::InvalidArgument, "question mismatch at position " + std::to_string(i) +
                                                  " ('" + b.question_id + "' vs '" +
                                                  a.question_id + "')");
    }
    const bool base_hit = b.recall(5) == 1.0;
    const bool rerank_hit = a.recall(5) == 1.0;
    if (!base_hit && rerank_hit) {
      ++r.rescued;
      RescuedQuestion rq{b.question_id, {}};
      for (std::size_t g = 0; g < b.gold_ranks.size(); ++g) {
        rq.movement.emplace_back(b.gold_ranks[g], a.gold_ranks[g]);
      }
      r.rescued_table.push_back(std::move(rq));
    } else if (base_hit && !rerank_hit) {
      ++r.regressed;
    } else if (base_hit) {
      ++r.unchanged_hit;
    } else {
      ++r.unchanged_miss;
      const bool outside = std::any_of(b.gold_ranks.begin(), b.gold_ranks.end(),
                                       [](const auto& rank) { return !rank.has_value(); });
      miss_outside += outside ? 1 : 0;
    }
  }
  r.miss_outside_pool_fraction =
      r.unchanged_miss ? static_cast<double>(miss_outside) / static_cast<double>(r.unchanged_miss)
                       : 0.0;
  return r;
}

namespace {

nlohmann::json rank_json(const std::optional<Index>& r) {
  return r ? nlohmann::json(*r) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const RankMovementReport& r) {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& q : r.rescued_table) {
    nlohmann::json moves = nlohmann::json::array();
    for (const auto& [from, to] : q.movement) moves.push_back({rank_json(from), rank_json(to)});
    table.push_back({{"question_id", q.question_id}, {"movement", moves}});
  }
  return {{"rescued", r.rescued},
          {"regressed", r.regressed},
          {"unchanged_hit", r.unchanged_hit},
          {"unchanged_miss", r.unchanged_miss},
          {"miss_outside_pool_fraction", r.miss_outside_pool_fraction},
          {"rescued_table", table}};
}

std::vector<EvalQuestion> make_eval_questions(const std::vector<QuestionRecord>& records,
                                               const EmbeddingMatrix& queries,
                                               const EmbeddingMatrix& passages) {
  std::vector<EvalQuestion> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (r.gold_passage_ids.empty()) {
      throw Error(ErrorKind::InvalidArgument, "question '" + r.question_id + "' has no gold");
    }
    EvalQuestion q;
    q.question_id = r.question_id;
    q.query_row = queries.ids.row(r.question_id);
    for (const auto& g : r.gold_passage_ids) q.gold_rows.push_back(passages.ids.row(g));
    q.answer = r.gold_answer;
    out.push_back(std::move(q));
  }
  return out;
}

EvalContext::EvalContext(const EmbeddingMatrix& passages, const EmbeddingMatrix& transformed,
                         const AssocModelF& model, const EmbeddingMatrix& queries,
                         std::vector<EvalQuestion> questions, Index max_depth, ScoringMode mode)
    : passages_(passages), questions_(std::move(questions)), max_depth_(max_depth) {
  if (max_depth < 1 || max_depth > passages.rows()) {
    throw Error(ErrorKind::OutOfRange, "pool depth " + std::to_string(max_depth) +
                                           " outside [1, " + std::to_string(passages.rows()) + "]");
  }
  pools_.reserve(questions_.size());
  assoc_.reserve(questions_.size());
  for (const auto& q : questions_) {
    const auto qv = queries.row(q.query_row);
    pools_.push_back(top_k(qv, passages, max_depth, q.question_id));
    const auto fq = forward(model, Eigen::Map<const Vector<float>>(qv.data(), model.dim())).output;
    assoc_.push_back(association_scores(pools_.back(),
                                        {fq.data(), static_cast<std::size_t>(fq.size())}, qv,
                                        passages, transformed, mode));
  }
}

std::vector<std::vector<Index>> EvalContext::dense_rankings(Index depth) const {
  std::vector<std::vector<Index>> out;
  out.reserve(pools_.size());
  for (const auto& pool : pools_) {
    auto& ranking = out.emplace_back();
    const Index n = std::min<Index>(depth, static_cast<Index>(pool.candidates.size()));
    for (Index i = 0; i < n; ++i) ranking.push_back(pool.candidates[i].passage_row);
  }
  return out;
}

std::vector<std::vector<Index>> EvalContext::rerank_rankings(double lambda, Index depth) const {
  if (depth < 1 || depth > max_depth_) {
    throw Error(ErrorKind::OutOfRange, "depth " + std::to_string(depth) +
                                           " exceeds prepared pool depth " +
                                           std::to_string(max_depth_));
  }
  std::vector<std::vector<Index>> out;
  out.reserve(pools_.size());
  for (std::size_t q = 0; q < pools_.size(); ++q) {
    CandidatePool prefix{pools_[q].query_id,
                         {pools_[q].candidates.begin(), pools_[q].candidates.begin() + depth}};
    const std::span<const float> scores(assoc_[q].data(), static_cast<std::size_t>(depth));
    auto& ranking = out.emplace_back();
    for (const auto& c : blend_and_rerank(prefix, scores, lambda, depth)) {
      ranking.push_back(c.passage_row);
    }
  }
  return out;
}

SystemRanks EvalContext::ranks(const std::vector<std::vector<Index>>& rankings) const {
  std::vector<std::string> ids;
  std::vector<std::vector<Index>> gold;
  for (const auto& q : questions_) {
    ids.push_back(q.question_id);
    gold.push_back(q.gold_rows);
  }
  return ranks_from_rankings(ids, rankings, gold);
}

std::vector<SweepRow> lambda_sweep(const EvalContext& ctx, const std::vector<double>& lambdas,
                                   const std::vector<Index>& ks) {
  const double pool_recall = mean_recall(ctx.ranks(ctx.dense_rankings(ctx.max_depth())),
                                         ctx.max_depth());
  std::vector<SweepRow> rows;
  for (double lambda : lambdas) {
    const auto ranks = ctx.ranks(ctx.rerank_rankings(lambda));
    SweepRow row{lambda, {}, pool_recall};
    for (Index k : ks) row.recall.emplace_back(k, mean_recall(ranks, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SweepRow> pool_depth_sweep(const EvalContext& ctx, const std::vector<Index>& depths,
                                       double lambda, const std::vector<Index>& ks) {
  std::vector<SweepRow> rows;
  for (Index depth : depths) {
    if (depth > ctx.max_depth()) {
      throw Error(ErrorKind::OutOfRange, "depth " + std::to_string(depth) +
                                             " exceeds prepared pool depth " +
                                             std::to_string(ctx.max_depth()));
    }
    const double pool_recall = mean_recall(ctx.ranks(ctx.dense_rankings(depth)), depth);
    const auto ranks = ctx.ranks(ctx.rerank_rankings(lambda, depth));
    SweepRow row{static_cast<double>(depth), {}, pool_recall};
    for (Index k : ks) {
      const double r = mean_recall(ranks, k);
      if (r > pool_recall + 1e-12) {
        throw Error(ErrorKind::Infeasible, "reranked recall exceeds pool recall at depth " +
                                               std::to_string(depth));
      }
      row.recall.emplace_back(k, r);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows, const std::string& key_name) {
  std::ostringstream out;
  out.precision(17);
  out << key_name;
  if (!rows.empty()) {
    for (const auto& [k, _] : rows.front().recall) out << ",R@" << k;
  }
  out << ",pool_recall\n";
  for (const auto& row : rows) {
    out << row.key;
    for (const auto& [_, r] : row.recall) out << ',' << r;
    out << ',' << row.pool_recall << '\n';
  }
  return out.str();
}

namespace {

nlohmann::json ranks_json(const QuestionRanks& q) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : q.gold_ranks) arr.push_back(rank_json(r));
  return arr;
}

nlohmann::json ci_json(const ConfidenceInterval& ci) { return {ci.lower, ci.upper}; }

nlohmann::json delta_block(const SystemRanks& base, const SystemRanks& rerank,
                           const std::vector<std::size_t>& subset, const EvalOptions& opt) {
  nlohmann::json j = {{"count", subset.size()}};
  if (subset.empty()) return j;
  std::vector<double> deltas;
  double base_sum = 0, rerank_sum = 0;
  for (std::size_t i : subset) {
    base_sum += base[i].recall(5);
    rerank_sum += rerank[i].recall(5);
    deltas.push_back(rerank[i].recall(5) - base[i].recall(5));
  }
  const double n = static_cast<double>(subset.size());
  j["dense_r5"] = base_sum / n;
  j["aar_r5"] = rerank_sum / n;
  j["delta_r5"] = (rerank_sum - base_sum) / n;
  j["delta_r5_ci"] = ci_json(paired_bootstrap_ci(deltas, opt.bootstrap_resamples, opt.bootstrap_seed));
  return j;
}

}  // namespace

nlohmann::json evaluate(const EvalContext& ctx, const EvalOptions& options,
                        const std::vector<std::string>& passage_texts) {
  const auto dense_lists = ctx.dense_rankings(ctx.max_depth());
  const auto rerank_lists = ctx.rerank_rankings(options.lambda);
  const auto dense = ctx.ranks(dense_lists);
  const auto aar = ctx.ranks(rerank_lists);

  auto recall_block = [&](const SystemRanks& s) {
    nlohmann::json j = nlohmann::json::object();
    for (Index k : options.ks) j[std::to_string(k)] = mean_recall(s, k);
    return j;
  };

  nlohmann::json report;
  report["questions"] = ctx.size();
  report["pool_depth"] = ctx.max_depth();
  report["lambda"] = options.lambda;
  report["systems"]["dense"]["recall"] = recall_block(dense);
  report["systems"]["aar"]["recall"] = recall_block(aar);

  if (!passage_texts.empty() && ctx.size() > 0) {
    std::vector<std::string> normalized;
    normalized.reserve(passage_texts.size());
    for (const auto& t : passage_texts) normalized.push_back(qa_normalize(t));
    auto coverage = [&](const std::vector<std::vector<Index>>& lists) {
      nlohmann::json j = nlohmann::json::object();
      std::size_t scored = 0;
      std::vector<std::size_t> hits(options.coverage_ks.size(), 0);
      for (std::size_t q = 0; q < ctx.size(); ++q) {
        const std::string answer = qa_normalize(ctx.questions()[q].answer);
        if (answer.empty()) continue;
        ++scored;
        for (std::size_t c = 0; c < options.coverage_ks.size(); ++c) {
          const auto limit = std::min<std::size_t>(
              lists[q].size(), static_cast<std::size_t>(options.coverage_ks[c]));
          for (std::size_t i = 0; i < limit; ++i) {
            if (normalized[static_cast<std::size_t>(lists[q][i])].find(answer) !=
                std::string::npos) {
              ++hits[c];
              break;
            }
          }
        }
      }
      for (std::size_t c = 0; c < options.coverage_ks.size(); ++c) {
        j[std::to_string(options.coverage_ks[c])] =
            scored ? static_cast<double>(hits[c]) / static_cast<double>(scored) : 0.0;
      }
      return std::make_pair(j, scored);
    };
    auto [dense_cov, scored] = coverage(dense_lists);
    report["systems"]["dense"]["coverage"] = dense_cov;
    report["systems"]["aar"]["coverage"] = coverage(rerank_lists).first;
    report["coverage_questions"] = scored;
  }

  std::vector<std::size_t> all(ctx.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  report["overall"] = delta_block(dense, aar, all, options);
  const auto split = easy_hard_split(dense);
  report["easy"] = delta_block(dense, aar, split.easy, options);
  report["hard"] = delta_block(dense, aar, split.hard, options);
  report["rank_movement"] = to_json(rank_movement_report(dense, aar));

  if (options.per_question) {
    nlohmann::json pq = nlohmann::json::array();
    for (std::size_t i = 0; i < ctx.size(); ++i) {
      pq.push_back({{"question_id", dense[i].question_id},
                    {"dense_ranks", ranks_json(dense[i])},
                    {"aar_ranks", ranks_json(aar[i])}});
    }
    report["per_question"] = pq;
  }
  return report;
}

std::vector<QaPrediction> load_predictions(const std::filesystem::path& path) {
  std::vector<QaPrediction> out;
  for (const auto& j : io::read_json_lines(path)) {
    try {
      out.push_back({j.at("question_id").get<std::string>(), j.at("prediction").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::CorruptFile, path.string() + ": bad prediction: " + e.what());
    }
  }
  return out;
}

nlohmann::json qa_report(const std::vector<QuestionRecord>& records,
                         const std::vector<QaPrediction>& system,
                         const std::vector<QaPrediction>* baseline, std::size_t resamples,
                         std::uint64_t seed) {
  std::unordered_map<std::string, std::string> gold;
  for (const auto& r : records) gold.emplace(r.question_id, r.gold_answer);

  auto score = [&](const std::vector<QaPrediction>& preds) {
    std::map<std::string, QaScore> out;
    for (const auto& p : preds) {
      auto it = gold.find(p.question_id);
      if (it == gold.end()) {
        throw Error(ErrorKind::UnknownId, "prediction for unknown question '" + p.question_id + "'");
      }
      out[p.question_id] = em_and_f1(p.prediction, it->second);
    }
    return out;
  };
  auto summary = [](const std::map<std::string, QaScore>& s) {
    double em = 0, f1 = 0;
    for (const auto& [_, v] : s) {
      em += v.em;
      f1 += v.f1;
    }
    const double n = s.empty() ? 1.0 : static_cast<double>(s.size());
    return nlohmann::json{{"count", s.size()}, {"em", em / n}, {"f1", f1 / n}};
  };

  const auto sys = score(system);
  nlohmann::json j;
  j["system"] = summary(sys);
  if (baseline) {
    const auto base = score(*baseline);
    j["baseline"] = summary(base);
    std::vector<double> d_em, d_f1;
    for (const auto& [qid, s] : sys) {
      auto it = base.find(qid);
      if (it == base.end()) continue;
      d_em.push_back(s.em - it->second.em);
      d_f1.push_back(s.f1 - it->second.f1);
    }
    j["paired_count"] = d_em.size();
    if (!d_em.empty()) {
      j["delta_em_ci"] = ci_json(paired_bootstrap_ci(d_em, resamples, seed));
      j["delta_f1_ci"] = ci_json(paired_bootstrap_ci(d_f1, resamples, seed));
    }
  }
  return j;
}

const LatencyComponent& LatencyStats::component(const std::string& name) const {
  for (const auto& c : components) {
    if (c.name == name) return c;
  }
  throw Error(ErrorKind::InvalidArgument, "no latency component '" + name + "'");
}

LatencyStats summarize_latency(Index pool_depth, const std::vector<std::vector<double>>& samples_ms,
                               const std::vector<std::string>& names) {
  LatencyStats stats;
  stats.pool_depth = pool_depth;
  for (std::size_t c = 0; c < names.size(); ++c) {
    std::vector<double> s = samples_ms.at(c);
    if (s.empty()) throw Error(ErrorKind::InvalidArgument, "no latency samples");
    stats.samples = s.size();
    double sum = 0;
    for (double v : s) sum += v;
    std::sort(s.begin(), s.end());
    const double mean = s.size() == 1 ? s[0] : sum / static_cast<double>(s.size());
    stats.components.push_back({names[c], mean, percentile_sorted(s, 0.95)});
  }
  return stats;
}

std::vector<LatencyStats> latency_bench(const EmbeddingMatrix& passages,
                                       const EmbeddingMatrix& transformed,
                                       const AssocModelF& model, const EmbeddingMatrix& queries,
                                       const std::vector<RerankConfig>& configs, int warmup,
                                       int reps) {
  if (reps < 1) throw Error(ErrorKind::InvalidArgument, "latency bench needs reps >= 1");
  if (queries.rows() < 1) throw Error(ErrorKind::InvalidArgument, "latency bench needs queries");
  for (const auto& c : configs) c.validate();
  using clock = std::chrono::steady_clock;
  const std::vector<std::string> names = {"candidate_retrieval", "query_transform",
                                          "association_scoring", "total"};
  // samples[config][component]
  std::vector<std::vector<std::vector<double>>> samples(
      configs.size(), std::vector<std::vector<double>>(names.size()));
  Index sink = 0;

  auto run_one = [&](Index q, std::size_t ci, bool record) {
    const RerankConfig& config = configs[ci];
    const auto qv = queries.row(q);
    const auto t0 = clock::now();
    const auto pool = top_k(qv, passages, config.pool_depth);
    const auto t1 = clock::now();
    const auto fq = forward(model, Eigen::Map<const Vector<float>>(qv.data(), model.dim())).output;
    const auto t2 = clock::now();
    const auto scores = association_scores(
        pool, {fq.data(), static_cast<std::size_t>(fq.size())}, qv, passages, transformed,
        config.mode);
    const auto ranked = blend_and_rerank(pool, scores, config);
    const auto t3 = clock::now();
    sink += ranked.front().passage_row;
    if (!record) return;
    auto ms = [](clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); };
    auto& out = samples[ci];
    out[0].push_back(ms(t1 - t0));
    out[1].push_back(ms(t2 - t1));
    out[2].push_back(ms(t3 - t2));
    out[3].push_back(ms(t3 - t0));
  };

  // Configurations are interleaved per query so that they see the same machine state.
  for (int r = 0; r < warmup + reps; ++r) {
    for (Index q = 0; q < queries.rows(); ++q) {
      for (std::size_t ci = 0; ci < configs.size(); ++ci) run_one(q, ci, r >= warmup);
    }
  }
  volatile Index keep = sink;
  (void)keep;
  std::vector<LatencyStats> out;
  for (std::size_t ci = 0; ci < configs.size(); ++ci) {
    out.push_back(summarize_latency(configs[ci].pool_depth, samples[ci], names));
  }
  return out;
}

LatencyStats latency_bench(const EmbeddingMatrix& passages, const EmbeddingMatrix& transformed,
                           const AssocModelF& model, const EmbeddingMatrix& queries,
                           const RerankConfig& config, int warmup, int reps) {
  return latency_bench(passages, transformed, model, queries, std::vector<RerankConfig>{config},
                       warmup, reps)
      .front();
}

nlohmann::json to_json(const LatencyStats& s) {
  nlohmann::json comps = nlohmann::json::object();
  for (const auto& c : s.components) comps[c.name] = {{"mean_ms", c.mean_ms}, {"p95_ms", c.p95_ms}};
  return {{"pool_depth", s.pool_depth}, {"samples", s.samples}, {"components", comps}};
}

}  // namespace aar
