// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include "aar/cli.hpp"
#include "aar/dense_index.hpp"
#include "aar/evaluation.hpp"
#include "aar/io.hpp"
#include "aar/reranker.hpp"
#include "aar/trainer.hpp"

#define DOCTEST_CONFIG_DISABLE
#include "gradcheck.hpp"
#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

using namespace aar;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s [%02d] %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

/// Runs `fn`, which fills `detail` and returns pass/fail; exceptions fail.
void criterion(int id, const std::string& name, const std::function<bool(std::string&)>& fn) {
  std::string detail;
  bool ok = false;
  try {
    ok = fn(detail);
  } catch (const std::exception& e) {
    detail += std::string(" exception: ") + e.what();
  }
  report(id, name, ok, detail);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Config experiment_config(const fs::path& data, const fs::path& work) {
  Config c = Config::load(fs::path(AAR_SOURCE_DIR) / "configs" / "synthetic.conf");
  c.set("paths.data_dir", data.string());
  c.set("paths.work_dir", work.string());
  c.set("eval.per_question", "false");
  return c;
}

struct RunResult {
  double dense_r5 = 0, aar_r5 = 0;
  double delta() const { return aar_r5 - dense_r5; }
};

RunResult pairs_train_eval(Config c) {
  cmd_pairs(c);
  cmd_train(c);
  cmd_eval(c);
  const auto rep = nlohmann::json::parse(io::read_text(fs::path(c.get("paths.work_dir", "")) / "eval_report.json"));
  return {rep["overall"]["dense_r5"].get<double>(), rep["overall"]["aar_r5"].get<double>()};
}

std::string r5_text(const RunResult& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "dense R@5 %.3f, reranked R@5 %.3f, delta %+.1f pts", r.dense_r5,
                r.aar_r5, 100 * r.delta());
  return buf;
}

}  // namespace

int main() {
  aar::test::TempDir root("acceptance");

  criterion(1, "parameter count at d=1024", [](std::string& d) {
    const auto t0 = std::chrono::steady_clock::now();
    const AssocModelF m = init_model(1024, 0);
    std::uint64_t counted = 0;
    visit_parameters(m, [&](const std::string&, const float*, std::size_t n) { counted += n; });
    const double s = seconds_since(t0);
    d = std::to_string(counted) + " parameters in " + fmt("%.3f s", s);
    return counted == 4204545u && param_count(m) == 4204545u && s < 1.0;
  });

  criterion(2, "analytic gradients vs central differences", [](std::string& d) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2024);
    double worst = 0;
    std::string where;
    int configs = 0;
    for (int trial = 0; trial < 12; ++trial) {
      const Index dim = std::uniform_int_distribution<Index>(1, 8)(rng);
      const Index b = std::uniform_int_distribution<Index>(2, 4)(rng);
      const double tau = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
      const AssocModelD m = aar::test::random_model<double>(dim, rng());
      const auto batch = aar::test::random_batch(dim, b, rng, true);
      for (NegativeMode mode : {NegativeMode::InBatch, NegativeMode::RandomSampled}) {
        const auto r = aar::test::finite_difference_check(m, batch, tau, mode, 1e-5);
        if (r.checked != param_count(static_cast<std::uint64_t>(dim))) return false;
        ++configs;
        if (r.max_rel_error > worst) {
          worst = r.max_rel_error;
          where = "d=" + std::to_string(dim) + " B=" + std::to_string(b) + " " + r.worst;
        }
      }
    }
    const double s = seconds_since(t0);
    d = std::to_string(configs) + " configurations, max rel error " + fmt("%.2e", worst) + " (" + where +
        "), " + fmt("%.2f s", s);
    return configs >= 20 && worst <= 1e-4 && s < 30.0;
  });

  criterion(3, "loss of all-equal logits", [](std::string& d) {
    bool ok = true;
    for (Index b : {2, 8, 64}) {
      const double loss = symmetric_ce_loss(RowMatrixXd(RowMatrixXd::Constant(b, b, 0.37)));
      const double err = std::abs(loss - std::log(static_cast<double>(b)));
      d += "B=" + std::to_string(b) + " err " + fmt("%.1e", err) + "; ";
      ok = ok && err <= 1e-9;
    }
    const double one = symmetric_ce_loss(RowMatrixXd(RowMatrixXd::Constant(1, 1, 4.0)));
    d += "B=1 loss " + fmt("%g", one);
    return ok && one == 0.0;
  });

  criterion(4, "alpha_raw=20 rerank equals dense top-k", [](std::string& d) {
    const auto t0 = std::chrono::steady_clock::now();
    const Index dim = 64;
    const auto passages = aar::test::unit_matrix(2000, dim, 41);
    const auto queries = aar::test::unit_matrix(100, dim, 42, "q");
    AssocModelF model = init_model(dim, 43);
    model.alpha_raw = 20.f;
    const auto transformed = transform_matrix(model, passages).matrix;
    std::size_t compared = 0, mismatched = 0;
    for (Index q = 0; q < queries.rows(); ++q) {
      const auto dense = top_k(queries.row(q), passages, 20);
      for (double lambda : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        for (ScoringMode mode : kAllScoringModes) {
          const auto out = rerank_query("q", queries.row(q), passages, transformed, model,
                                        RerankConfig{lambda, 100, 20, mode});
          ++compared;
          bool same = out.size() == dense.candidates.size();
          for (std::size_t i = 0; same && i < out.size(); ++i) {
            same = out[i].passage_row == dense.candidates[i].passage_row;
          }
          mismatched += !same;
        }
      }
    }
    const double s = seconds_since(t0);
    d = std::to_string(compared) + " rankings, " + std::to_string(mismatched) + " differ, " + fmt("%.2f s", s);
    return mismatched == 0 && s < 10.0;
  });

  criterion(5, "top_k vs 64-bit full-sort oracle", [](std::string& d) {
    std::mt19937_64 rng(55);
    int bad = 0, ties = 0;
    for (int trial = 0; trial < 50; ++trial) {
      const Index n = std::uniform_int_distribution<Index>(50, 1000)(rng);
      const Index dim = std::uniform_int_distribution<Index>(2, 32)(rng);
      const Index k = std::uniform_int_distribution<Index>(1, 50)(rng);
      EmbeddingMatrix m = aar::test::unit_matrix(n, dim, rng());
      for (int i = 0; i < 20; ++i) {
        m.data.row(std::uniform_int_distribution<Index>(0, n - 1)(rng)) =
            m.data.row(std::uniform_int_distribution<Index>(0, n - 1)(rng)).eval();
      }
      const auto qm = aar::test::unit_matrix(1, dim, rng());
      const auto query = trial % 2 ? qm.row(0) : m.row(trial % n);
      std::vector<std::pair<double, Index>> all;
      for (Index i = 0; i < n; ++i) {
        double s = 0;
        for (Index j = 0; j < dim; ++j) s += double(query[j]) * double(m.data(i, j));
        all.emplace_back(s, i);
      }
      std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
      });
      const auto pool = top_k(query, m, k);
      for (Index i = 0; i < k; ++i) {
        const Index got = pool.candidates[i].passage_row, want = all[i].second;
        if (got == want) continue;
        // Rows may differ only where the exact scores are equal up to float rounding.
        const double gap = std::abs(all[i].first - m.data.row(got).cast<double>().dot(
                                                       Eigen::Map<const Eigen::VectorXf>(query.data(), dim).cast<double>()));
        if (gap > 1e-6) ++bad;
      }
      for (Index i = 0; i + 1 < k; ++i) ties += all[i].first == all[i + 1].first;
    }
    d = "50 instances, " + std::to_string(bad) + " mismatches, " + std::to_string(ties) + " exact ties inside top-k";
    return bad == 0 && ties > 0;
  });

  // Synthetic experiments share one generated corpus.
  const fs::path data = root / "data";
  {
    Config c = experiment_config(data, root / "trans");
    cmd_synth(c);
  }
  RunResult trans, trans_val, ind_val;
  criterion(6, "synthetic transductive gain >= 15 pts", [&](std::string& d) {
    const auto t0 = std::chrono::steady_clock::now();
    trans = pairs_train_eval(experiment_config(data, root / "trans"));
    const double s = seconds_since(t0);
    d = r5_text(trans) + ", " + fmt("%.1f s", s);
    return trans.delta() >= 0.15 && s < 300;
  });

  criterion(7, "shuffled pairs fall below baseline", [&](std::string& d) {
    Config c = experiment_config(data, root / "shuffled");
    c.set("pairs.source", "shuffled");
    const auto r = pairs_train_eval(c);
    d = r5_text(r);
    return r.aar_r5 < r.dense_r5;
  });

  criterion(8, "similar positives give no gain", [&](std::string& d) {
    Config c = experiment_config(data, root / "similar");
    c.set("pairs.source", "similar_positives");
    const auto r = pairs_train_eval(c);
    d = r5_text(r);
    return r.aar_r5 <= r.dense_r5 + 0.01;
  });

  criterion(9, "inductive delta >= 10 pts below transductive", [&](std::string& d) {
    // Both deltas are measured on the held-out (validation) questions only.
    Config t = experiment_config(data, root / "trans");
    t.set("eval.split", "validation");
    t.set("paths.eval_report", (root / "trans" / "eval_val.json").string());
    cmd_eval(t);
    const auto rep = nlohmann::json::parse(io::read_text(root / "trans" / "eval_val.json"));
    trans_val = {rep["overall"]["dense_r5"].get<double>(), rep["overall"]["aar_r5"].get<double>()};

    Config c = experiment_config(data, root / "inductive");
    c.set("pairs.split_mode", "inductive");
    c.set("eval.split", "validation");
    ind_val = pairs_train_eval(c);
    const double gap = trans_val.delta() - ind_val.delta();
    d = "transductive " + fmt("%+.1f", 100 * trans_val.delta()) + " pts, inductive " +
        fmt("%+.1f", 100 * ind_val.delta()) + " pts, gap " + fmt("%.1f pts", 100 * gap);
    return gap >= 0.10;
  });

  criterion(10, "metric oracles", [](std::string& d) {
    std::mt19937_64 rng(1010);
    auto tok = [&](int vocab) { return "w" + std::to_string(std::uniform_int_distribution<int>(0, vocab - 1)(rng)); };
    int bad = 0;
    // recall_at_k against set intersection.
    for (int t = 0; t < 100; ++t) {
      std::vector<std::string> ranked;
      for (int i = 0; i < 25; ++i) ranked.push_back("p" + std::to_string(i));
      std::shuffle(ranked.begin(), ranked.end(), rng);
      std::set<std::string> gold;
      while (gold.size() < 1 + t % 4) gold.insert("p" + std::to_string(std::uniform_int_distribution<int>(0, 40)(rng)));
      const Index k = 1 + t % 25;
      std::size_t hit = 0;
      for (const auto& g : gold) hit += std::find(ranked.begin(), ranked.begin() + k, g) != ranked.begin() + k;
      bad += recall_at_k(ranked, {gold.begin(), gold.end()}, k) != double(hit) / double(gold.size());
    }
    // coverage_at_k against substring search on lowercased single-spaced text.
    for (int t = 0; t < 100; ++t) {
      std::vector<std::string> texts, plain;
      for (int i = 0; i < 6; ++i) {
        std::string raw, norm;
        for (int w = 0; w < 5; ++w) {
          std::string x = tok(30);
          norm += (w ? " " : "") + x;
          if (w % 2) x[0] = 'W';
          raw += x + (w % 3 ? ",  " : " ");
        }
        texts.push_back(raw);
        plain.push_back(norm);
      }
      const std::string answer = tok(30) + (t % 2 ? " " + tok(30) : "");
      const Index k = 1 + t % 6;
      bool want = false;
      for (Index i = 0; i < k; ++i) want = want || plain[i].find(answer) != std::string::npos;
      bad += coverage_at_k(texts, "The " + answer, k) != want;
    }
    // em_and_f1 against multiset overlap.
    for (int t = 0; t < 100; ++t) {
      std::vector<std::string> p, g;
      for (int i = 0, n = 1 + t % 5; i < n; ++i) p.push_back(tok(6));
      for (int i = 0, n = 1 + (t / 5) % 5; i < n; ++i) g.push_back(tok(6));
      std::multiset<std::string> mp(p.begin(), p.end()), mg(g.begin(), g.end());
      std::size_t common = 0;
      for (const auto& w : std::set<std::string>(p.begin(), p.end())) common += std::min(mp.count(w), mg.count(w));
      const double pr = double(common) / p.size(), rc = double(common) / g.size();
      const double f1 = common ? 2 * pr * rc / (pr + rc) : 0.0;
      auto join = [](const std::vector<std::string>& v) {
        std::string s;
        for (const auto& w : v) s += (s.empty() ? "" : " ") + w;
        return s;
      };
      const auto s = em_and_f1(join(p), join(g));
      bad += std::abs(s.f1 - f1) > 1e-12 || s.em != (p == g);
    }
    // paired_bootstrap_ci against the exact bootstrap distribution (all n^n resamples).
    for (int t = 0; t < 100; ++t) {
      const std::size_t n = 2 + t % 4;
      std::vector<double> dl(n);
      for (auto& v : dl) v = std::uniform_int_distribution<int>(-8, 8)(rng) / 8.0;
      std::vector<double> means;
      std::vector<std::size_t> idx(n, 0);
      for (;;) {
        double s = 0;
        for (std::size_t i : idx) s += dl[i];
        means.push_back(s / n);
        std::size_t pos = 0;
        while (pos < n && ++idx[pos] == n) idx[pos++] = 0;
        if (pos == n) break;
      }
      std::sort(means.begin(), means.end());
      auto q = [&](double p) { return means[std::min(means.size() - 1, std::size_t(p * means.size()))]; };
      const auto ci = paired_bootstrap_ci(dl, 10000, t);
      bad += ci.lower < q(0.015) - 1e-12 || ci.lower > q(0.035) + 1e-12 || ci.upper < q(0.965) - 1e-12 ||
             ci.upper > q(0.985) + 1e-12;
    }
    const std::vector<double> zeros(200, 0.0);
    const auto zci = paired_bootstrap_ci(zeros);
    const std::string apple = qa_normalize("The Big Apple!");
    d = "400 fixtures, " + std::to_string(bad) + " mismatches; zero-delta CI [" + fmt("%g", zci.lower) + ", " +
        fmt("%g", zci.upper) + "]; normalize -> \"" + apple + "\"";
    return bad == 0 && zci.lower == 0.0 && zci.upper == 0.0 && apple == "big apple";
  });

  criterion(11, "sweep structure", [&](std::string& d) {
    const Config c = experiment_config(data, root / "trans");
    const auto passages = load_matrix(data / "passages.aare");
    const auto queries = load_matrix(data / "queries.aare");
    const auto model = load_model(root / "trans" / "model.aarm");
    const auto transformed = transform_matrix(model, passages).matrix;
    const EvalContext ctx(passages, transformed, model, queries,
                          make_eval_questions(load_records(data / "records.jsonl"), queries, passages), 200,
                          ScoringMode::MixedBidi);
    const auto lrows = lambda_sweep(ctx, {0.0, 0.25, 0.5, 0.75, 1.0}, {5, 10, 20});
    const auto dense = ctx.ranks(ctx.dense_rankings(200));
    bool ok = true;
    for (const auto& [k, r] : lrows[0].recall) ok = ok && r == mean_recall(dense, k);
    std::size_t checked = 0;
    for (Index depth : {5, 10, 20, 50, 100, 200}) {
      const double pool = mean_recall(ctx.ranks(ctx.dense_rankings(depth)), depth);
      for (double lambda : {0.25, 0.5, 1.0}) {
        const auto ranks = ctx.ranks(ctx.rerank_rankings(lambda, depth));
        for (Index k : {5, 10, 20}) {
          ok = ok && mean_recall(ranks, k) <= pool + 1e-12;
          ++checked;
        }
      }
    }
    // The command path writes the same tables.
    cmd_sweep(c);
    const auto csv = io::read_text(root / "trans" / "sweep_lambda.csv");
    d = "lambda=0 row equals dense R@5 " + fmt("%.3f", mean_recall(dense, 5)) + "; " + std::to_string(checked) +
        " depth/lambda/k bounds hold";
    return ok && csv.find("lambda,R@5") == 0;
  });

  criterion(12, "end-to-end determinism", [&](std::string& d) {
    auto run = [&](const std::string& tag) {
      Config c = experiment_config(root / (tag + "_data"), root / tag);
      c.set("eval.per_question", "true");
      cmd_synth(c);
      cmd_pairs(c);
      cmd_train(c);
      cmd_rerank(c);
      cmd_eval(c);
      auto train = nlohmann::json::parse(io::read_text(root / tag / "train_report.json"));
      train.erase("wall_time_seconds");
      return std::vector<std::string>{io::read_text(root / tag / "eval_report.json"),
                                      io::read_text(root / tag / "rerank.jsonl"), train.dump(),
                                      io::read_text(root / tag / "pairs.tsv")};
    };
    const auto a = run("det_a"), b = run("det_b");
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
    const bool models = io::read_file(root / "det_a" / "model.aarm") == io::read_file(root / "det_b" / "model.aarm");
    d = std::to_string(same) + "/" + std::to_string(a.size()) + " reports byte-identical, checkpoints " +
        (models ? "identical" : "differ");
    return same == a.size() && models;
  });

  criterion(13, "latency benchmark", [&](std::string& d) {
    Config c = experiment_config(data, root / "trans");
    c.set("bench.depths", "100, 200");
    const auto rep = cmd_bench(c);
    bool ok = rep["runs"].size() == 2;
    for (const auto& run : rep["runs"]) {
      for (const char* name : {"candidate_retrieval", "association_scoring", "total"}) {
        const auto& comp = run["components"][name];
        ok = ok && comp.contains("mean_ms") && comp.contains("p95_ms") && comp["mean_ms"].get<double>() >= 0 &&
             comp["p95_ms"].get<double>() >= 0;
      }
    }
    const double ratio = rep.value("scoring_ratio_last_to_first", 0.0);
    const auto& k100 = rep["runs"][0]["components"];
    d = "K=100 scoring " + fmt("%.4f ms", k100["association_scoring"]["mean_ms"].get<double>()) + ", total " +
        fmt("%.4f ms", k100["total"]["mean_ms"].get<double>()) + "; K=200/K=100 scoring ratio " + fmt("%.2f", ratio);
    return ok && ratio >= 1.5 && ratio <= 3.0;
  });

  std::printf("%s: %d failing criteria\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
