#include "aar/cli.hpp"

#include "aar/evaluation.hpp"
#include "aar/io.hpp"
#include "aar/pair_data.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <ostream>

namespace aar {

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "paths.data_dir", "paths.work_dir", "paths.passages", "paths.queries", "paths.records",
      "paths.passage_texts", "paths.pairs", "paths.checkpoint", "paths.train_report",
      "paths.rerank_output", "paths.eval_report", "paths.lambda_csv", "paths.depth_csv",
      "paths.bench_report", "paths.predictions", "paths.baseline_predictions",
      "synth.n_passages", "synth.dim", "synth.n_questions", "synth.hops",
      "synth.bridge_offset_rank", "synth.bridge_rank_spread", "synth.noise_scale",
      "synth.anchor_max_rank", "synth.n_clusters", "synth.train_fraction", "synth.seed",
      "pairs.source", "pairs.split_mode", "pairs.shuffle_seed", "pairs.similar_count",
      "train.*", "model.seed", "run.threads",
      "rerank.lambda", "rerank.pool_depth", "rerank.cutoff", "rerank.mode",
      "eval.split", "eval.ks", "eval.coverage_ks", "eval.bootstrap_resamples",
      "eval.bootstrap_seed", "eval.per_question",
      "sweep.lambdas", "sweep.depths", "sweep.ks",
      "bench.depths", "bench.warmup", "bench.reps", "bench.max_queries",
  };
  return keys;
}

namespace {

namespace fs = std::filesystem;

fs::path data_path(const Config& c, const std::string& key, const char* file) {
  return c.get_path(key, fs::path(c.get("paths.data_dir", "data")) / file);
}

fs::path work_path(const Config& c, const std::string& key, const char* file) {
  return c.get_path(key, fs::path(c.get("paths.work_dir", "out")) / file);
}

unsigned threads_from(const Config& c) {
  const auto t = c.get_int("run.threads", 1);
  if (t < 0) throw Error(ErrorKind::Config, "run.threads must be >= 0");
  return static_cast<unsigned>(t);
}

EmbeddingMatrix load_passages(const Config& c) {
  return load_matrix(data_path(c, "paths.passages", "passages.aare"));
}

EmbeddingMatrix load_queries(const Config& c, Index dim) {
  LoadOptions opt;
  opt.expect_dim = dim;
  return load_matrix(data_path(c, "paths.queries", "queries.aare"), opt);
}

AssocModelF load_checkpoint(const Config& c, Index dim) {
  AssocModelF model = load_model(work_path(c, "paths.checkpoint", "model.aarm"));
  if (model.dim() != dim) {
    throw Error(ErrorKind::DimMismatch, "checkpoint dim " + std::to_string(model.dim()) +
                                            " != embedding dim " + std::to_string(dim));
  }
  return model;
}

std::vector<QuestionRecord> eval_records(const Config& c) {
  auto records = load_records(data_path(c, "paths.records", "records.jsonl"));
  const std::string split = c.get("eval.split", "all");
  if (split == "all") return records;
  const Split keep = parse_split(split);
  std::erase_if(records, [&](const QuestionRecord& r) { return r.split != keep; });
  return records;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  io::write_text_atomic(path, j.dump(2) + "\n");
}

/// Texts row-aligned with `passages`, or empty when no text file exists.
std::vector<std::string> passage_texts_for(const Config& c, const EmbeddingMatrix& passages) {
  const fs::path path = data_path(c, "paths.passage_texts", "passages.jsonl");
  if (!c.has("paths.passage_texts") && !fs::exists(path)) return {};
  std::vector<std::string> out(static_cast<std::size_t>(passages.rows()));
  std::vector<bool> seen(out.size(), false);
  for (auto& [id, text] : load_passage_texts(path)) {
    const auto row = static_cast<std::size_t>(passages.ids.row(id));
    out[row] = std::move(text);
    seen[row] = true;
  }
  const auto missing = std::find(seen.begin(), seen.end(), false);
  if (missing != seen.end()) {
    throw Error(ErrorKind::UnknownId,
                "no text for passage '" + passages.ids.id(missing - seen.begin()) + "'");
  }
  return out;
}

struct Pipeline {
  EmbeddingMatrix passages;
  EmbeddingMatrix queries;
  AssocModelF model;
  TransformedMatrix transformed;
};

Pipeline load_pipeline(const Config& c) {
  Pipeline p;
  p.passages = load_passages(c);
  p.queries = load_queries(c, p.passages.dim());
  p.model = load_checkpoint(c, p.passages.dim());
  p.transformed = transform_matrix(p.model, p.passages, "passages", threads_from(c));
  return p;
}

}  // namespace

SyntheticSpec synthetic_spec_from(const Config& c) {
  SyntheticSpec s;
  s.n_passages = c.get_int("synth.n_passages", s.n_passages);
  s.dim = c.get_int("synth.dim", s.dim);
  s.n_questions = c.get_int("synth.n_questions", s.n_questions);
  s.hops = static_cast<int>(c.get_int("synth.hops", s.hops));
  s.bridge_offset_rank = c.get_int("synth.bridge_offset_rank", s.bridge_offset_rank);
  s.bridge_rank_spread = c.get_double("synth.bridge_rank_spread", s.bridge_rank_spread);
  s.noise_scale = c.get_double("synth.noise_scale", s.noise_scale);
  s.anchor_max_rank = c.get_int("synth.anchor_max_rank", s.anchor_max_rank);
  s.n_clusters = c.get_int("synth.n_clusters", s.n_clusters);
  s.train_fraction = c.get_double("synth.train_fraction", s.train_fraction);
  s.seed = c.get_uint("synth.seed", s.seed);
  s.validate();
  return s;
}

TrainConfig train_config_from(const Config& c) {
  TrainConfig t;
  apply_train_settings(t, c.section("train"));
  t.validate();
  return t;
}

RerankConfig rerank_config_from(const Config& c) {
  RerankConfig r;
  r.lambda = c.get_double("rerank.lambda", r.lambda);
  r.pool_depth = c.get_int("rerank.pool_depth", r.pool_depth);
  r.cutoff = c.get_int("rerank.cutoff", r.cutoff);
  r.mode = parse_scoring_mode(c.get("rerank.mode", to_string(r.mode)));
  r.validate();
  return r;
}

nlohmann::json cmd_synth(const Config& c) {
  const SyntheticSpec spec = synthetic_spec_from(c);
  const SyntheticData data = generate(spec);
  save_matrix(data_path(c, "paths.passages", "passages.aare"), data.passages);
  save_matrix(data_path(c, "paths.queries", "queries.aare"), data.queries);
  save_records(data_path(c, "paths.records", "records.jsonl"), data.records);
  save_passage_texts(data_path(c, "paths.passage_texts", "passages.jsonl"), data.passage_texts);
  return {{"passages", data.passages.rows()},
          {"queries", data.queries.rows()},
          {"records", data.records.size()}};
}

nlohmann::json cmd_pairs(const Config& c) {
  const auto records = load_records(data_path(c, "paths.records", "records.jsonl"));
  const std::string source = c.get("pairs.source", "cooccurrence");
  ExtractStats stats;
  AssocPairSet pairs = extract_pairs(records, &stats);
  pairs = split_policy(pairs, parse_split_mode(c.get("pairs.split_mode", "transductive")));
  const std::size_t extracted = pairs.size();
  if (source == "shuffled") {
    pairs = shuffle_pairs(pairs, c.get_uint("pairs.shuffle_seed", 0));
  } else if (source == "similar_positives") {
    const EmbeddingMatrix passages = load_passages(c);
    const auto count = c.get_int("pairs.similar_count", static_cast<std::int64_t>(extracted));
    if (count < 0) throw Error(ErrorKind::Config, "pairs.similar_count must be >= 0");
    pairs = similar_positive_pairs(passages, static_cast<std::size_t>(count));
  } else if (source != "cooccurrence") {
    throw Error(ErrorKind::Config, "unknown pairs.source '" + source + "'");
  }
  save_pairs(work_path(c, "paths.pairs", "pairs.tsv"), pairs);
  return {{"source", source},
          {"pairs", pairs.size()},
          {"extracted", extracted},
          {"skipped_records", stats.skipped_records}};
}

nlohmann::json cmd_train(const Config& c) {
  const TrainConfig config = train_config_from(c);
  const EmbeddingMatrix passages = load_passages(c);
  const AssocPairSet pairs = load_pairs(work_path(c, "paths.pairs", "pairs.tsv"));
  AssocModelF model = init_model(passages.dim(), c.get_uint("model.seed", config.seed));
  const TrainReport report = train(model, pairs, passages, config);
  save_model(work_path(c, "paths.checkpoint", "model.aarm"), model);
  const nlohmann::json j = to_json(report, true);
  write_json(work_path(c, "paths.train_report", "train_report.json"), j);
  return {{"pairs", pairs.size()},
          {"epochs_run", report.epochs_run},
          {"final_loss", report.epoch_loss.empty() ? 0.0 : report.epoch_loss.back()},
          {"final_train_accuracy", report.final_train_accuracy}};
}

nlohmann::json cmd_rerank(const Config& c) {
  const RerankConfig config = rerank_config_from(c);
  const Pipeline p = load_pipeline(c);
  std::vector<nlohmann::json> rows;
  rows.reserve(static_cast<std::size_t>(p.queries.rows()));
  for (Index q = 0; q < p.queries.rows(); ++q) {
    const auto& qid = p.queries.ids.id(q);
    const auto ranking =
        rerank_query(qid, p.queries.row(q), p.passages, p.transformed.matrix, p.model, config);
    rows.push_back(ranking_to_json(qid, ranking, p.passages));
  }
  io::write_text_atomic(work_path(c, "paths.rerank_output", "rerank.jsonl"),
                        io::to_json_lines(rows));
  return {{"queries", rows.size()}, {"degenerate_passages", p.transformed.degenerate_rows.size()}};
}

namespace {

EvalOptions eval_options_from(const Config& c, double lambda) {
  EvalOptions o;
  o.lambda = lambda;
  o.ks = c.get_indices("eval.ks", o.ks);
  o.coverage_ks = c.get_indices("eval.coverage_ks", o.coverage_ks);
  o.bootstrap_resamples = c.get_uint("eval.bootstrap_resamples", o.bootstrap_resamples);
  o.bootstrap_seed = c.get_uint("eval.bootstrap_seed", o.bootstrap_seed);
  o.per_question = c.get_bool("eval.per_question", o.per_question);
  return o;
}

}  // namespace

nlohmann::json cmd_eval(const Config& c) {
  const RerankConfig config = rerank_config_from(c);
  const Pipeline p = load_pipeline(c);
  const auto records = eval_records(c);
  const EvalContext ctx(p.passages, p.transformed.matrix, p.model, p.queries,
                        make_eval_questions(records, p.queries, p.passages), config.pool_depth,
                        config.mode);
  nlohmann::json report = evaluate(ctx, eval_options_from(c, config.lambda),
                                   passage_texts_for(c, p.passages));
  report["scoring_mode"] = to_string(config.mode);
  report["split"] = c.get("eval.split", "all");
  if (c.has("paths.predictions")) {
    const auto system = load_predictions(c.get_path("paths.predictions", {}));
    std::vector<QaPrediction> baseline;
    if (c.has("paths.baseline_predictions")) {
      baseline = load_predictions(c.get_path("paths.baseline_predictions", {}));
    }
    const EvalOptions o = eval_options_from(c, config.lambda);
    report["qa"] = qa_report(records, system, c.has("paths.baseline_predictions") ? &baseline : nullptr,
                             o.bootstrap_resamples, o.bootstrap_seed);
  }
  write_json(work_path(c, "paths.eval_report", "eval_report.json"), report);
  nlohmann::json summary = {{"questions", ctx.size()}};
  summary["dense_r5"] = mean_recall(ctx.ranks(ctx.dense_rankings(ctx.max_depth())), 5);
  summary["aar_r5"] = mean_recall(ctx.ranks(ctx.rerank_rankings(config.lambda)), 5);
  return summary;
}

nlohmann::json cmd_sweep(const Config& c) {
  const RerankConfig config = rerank_config_from(c);
  const auto lambdas = c.get_doubles("sweep.lambdas", {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7,
                                                       0.8, 0.9, 1.0});
  const auto depths = c.get_indices("sweep.depths", {10, 20, 50, 100, 200});
  const auto ks = c.get_indices("sweep.ks", {5, 10, 20});
  const Pipeline p = load_pipeline(c);
  Index max_depth = config.pool_depth;
  for (Index d : depths) max_depth = std::max(max_depth, d);
  if (max_depth > p.passages.rows()) {
    throw Error(ErrorKind::OutOfRange, "sweep depth " + std::to_string(max_depth) +
                                           " exceeds corpus size " +
                                           std::to_string(p.passages.rows()));
  }
  const EvalContext ctx(p.passages, p.transformed.matrix, p.model, p.queries,
                        make_eval_questions(eval_records(c), p.queries, p.passages), max_depth,
                        config.mode);
  // The lambda sweep runs on the configured pool depth, not the deepest one.
  const EvalContext lambda_ctx(p.passages, p.transformed.matrix, p.model, p.queries,
                               ctx.questions(), config.pool_depth, config.mode);
  const auto by_lambda = lambda_sweep(lambda_ctx, lambdas, ks);
  const auto by_depth = pool_depth_sweep(ctx, depths, config.lambda, ks);
  io::write_text_atomic(work_path(c, "paths.lambda_csv", "sweep_lambda.csv"),
                        sweep_to_csv(by_lambda, "lambda"));
  io::write_text_atomic(work_path(c, "paths.depth_csv", "sweep_depth.csv"),
                        sweep_to_csv(by_depth, "depth"));
  return {{"lambda_rows", by_lambda.size()}, {"depth_rows", by_depth.size()}};
}

nlohmann::json cmd_bench(const Config& c) {
  const RerankConfig base = rerank_config_from(c);
  const auto depths = c.get_indices("bench.depths", {100, 200});
  const int warmup = static_cast<int>(c.get_int("bench.warmup", 2));
  const int reps = static_cast<int>(c.get_int("bench.reps", 5));
  const Pipeline p = load_pipeline(c);
  Index n_queries = std::min<Index>(p.queries.rows(), c.get_int("bench.max_queries", 200));
  const EmbeddingMatrix queries = make_matrix(p.queries.data.topRows(n_queries),
                                              {p.queries.ids.ids().begin(),
                                               p.queries.ids.ids().begin() + n_queries},
                                              p.queries.normalized, false);
  std::vector<RerankConfig> configs;
  for (Index depth : depths) {
    RerankConfig config = base;
    config.pool_depth = depth;
    config.cutoff = std::min(base.cutoff, depth);
    configs.push_back(config);
  }
  nlohmann::json runs = nlohmann::json::array();
  std::vector<double> scoring;
  for (const LatencyStats& stats :
       latency_bench(p.passages, p.transformed.matrix, p.model, queries, configs, warmup, reps)) {
    runs.push_back(to_json(stats));
    scoring.push_back(stats.component("association_scoring").mean_ms);
  }
  nlohmann::json report = {{"runs", runs}, {"queries", n_queries}, {"reps", reps}};
  if (scoring.size() >= 2 && scoring.front() > 0) {
    report["scoring_ratio_last_to_first"] = scoring.back() / scoring.front();
  }
  write_json(work_path(c, "paths.bench_report", "bench.json"), report);
  return report;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Association-augmented retrieval experiments"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "key = value config file");
  app.add_option("--set", overrides, "override one key (key=value)")->take_all();

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth", "generate a synthetic corpus"},
      {"pairs", "extract association pairs"},
      {"train", "train the association model"},
      {"rerank", "rerank every query"},
      {"eval", "evaluate dense and reranked retrieval"},
      {"sweep", "lambda and pool-depth sweeps"},
      {"bench", "latency benchmark"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    Config c = config_path.empty() ? Config{} : Config::load(config_path);
    for (const auto& o : overrides) c.apply_override(o);
    c.check_keys(known_config_keys());
    const std::string cmd = app.get_subcommands().front()->get_name();
    nlohmann::json summary;
    if (cmd == "synth") summary = cmd_synth(c);
    else if (cmd == "pairs") summary = cmd_pairs(c);
    else if (cmd == "train") summary = cmd_train(c);
    else if (cmd == "rerank") summary = cmd_rerank(c);
    else if (cmd == "eval") summary = cmd_eval(c);
    else if (cmd == "sweep") summary = cmd_sweep(c);
    else summary = cmd_bench(c);
    out << summary.dump() << "\n";
    return 0;
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << to_string(e.kind()) << ": " << msg << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: internal: " << msg << "\n";
    return 1;
  }
}

}  // namespace aar
