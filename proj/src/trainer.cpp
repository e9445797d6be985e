#include "aar/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <numbers>
#include <numeric>
#include <random>
#include <unordered_map>

namespace aar {

NegativeMode parse_negative_mode(const std::string& s) {
  if (s == "in_batch") return NegativeMode::InBatch;
  if (s == "random_sampled") return NegativeMode::RandomSampled;
  throw Error(ErrorKind::InvalidArgument, "unknown negative mode '" + s + "'");
}

const char* to_string(NegativeMode m) {
  return m == NegativeMode::InBatch ? "in_batch" : "random_sampled";
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidArgument, what); };
  if (!(temperature > 0)) fail("temperature must be > 0");
  if (batch_size < 2) fail("batch_size must be >= 2");
  if (epochs < 0) fail("epochs must be >= 0");
  if (!(learning_rate >= 0)) fail("learning_rate must be >= 0");
  if (!(min_lr_fraction >= 0 && min_lr_fraction <= 1)) fail("min_lr_fraction must be in [0, 1]");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1)) {
    fail("adam betas must be in [0, 1)");
  }
  if (!(adam_eps > 0)) fail("adam_eps must be > 0");
  if (!(weight_decay >= 0)) fail("weight_decay must be >= 0");
}

void apply_train_settings(TrainConfig& c, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    try {
      if (key == "batch_size") c.batch_size = std::stoll(value);
      else if (key == "temperature") c.temperature = std::stod(value);
      else if (key == "learning_rate") c.learning_rate = std::stod(value);
      else if (key == "epochs") c.epochs = std::stoi(value);
      else if (key == "weight_decay") c.weight_decay = std::stod(value);
      else if (key == "adam_beta1") c.adam_beta1 = std::stod(value);
      else if (key == "adam_beta2") c.adam_beta2 = std::stod(value);
      else if (key == "adam_eps") c.adam_eps = std::stod(value);
      else if (key == "seed") c.seed = std::stoull(value);
      else if (key == "negative_mode") c.negative_mode = parse_negative_mode(value);
      else if (key == "min_lr_fraction") c.min_lr_fraction = std::stod(value);
      else throw Error(ErrorKind::Config, "unknown train key '" + key + "'");
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::Config, "bad value '" + value + "' for train key '" + key + "'");
    }
  }
}

nlohmann::json to_json(const TrainReport& r, bool include_timing) {
  nlohmann::json j = {{"epoch_loss", r.epoch_loss},
                      {"final_train_accuracy", r.final_train_accuracy},
                      {"epochs_run", r.epochs_run}};
  if (include_timing) j["wall_time_seconds"] = r.wall_time_seconds;
  return j;
}

double learning_rate_at(const TrainConfig& config, int epoch) {
  const double base = config.learning_rate;
  const double floor = config.min_lr_fraction * base;
  if (config.epochs <= 1) return base;
  const double t = static_cast<double>(epoch) / static_cast<double>(config.epochs - 1);
  return floor + 0.5 * (base - floor) * (1.0 + std::cos(std::numbers::pi * t));
}

ResolvedPairs resolve_pairs(const AssocPairSet& pairs, const EmbeddingMatrix& embeddings) {
  ResolvedPairs r;
  r.left.reserve(pairs.size());
  r.right.reserve(pairs.size());
  for (const auto& p : pairs.pairs) {
    r.left.push_back(embeddings.ids.row(p.first));
    r.right.push_back(embeddings.ids.row(p.second));
  }
  return r;
}

AdamW::AdamW(const AssocModelF& model, const TrainConfig& config)
    : m1_(AssocModelF::zeros(model.dim())),
      m2_(AssocModelF::zeros(model.dim())),
      beta1_(config.adam_beta1),
      beta2_(config.adam_beta2),
      eps_(config.adam_eps),
      weight_decay_(config.weight_decay) {}

void AdamW::step(AssocModelF& model, const AssocModelF& grad, double learning_rate) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  const float decay = static_cast<float>(1.0 - learning_rate * weight_decay_);
  const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
  const float step_size = static_cast<float>(learning_rate / c1);
  const float inv_sqrt_c2 = static_cast<float>(1.0 / std::sqrt(c2));
  const float eps = static_cast<float>(eps_);

  // Collect the blocks of all four structures in matching order.
  std::vector<float*> p, m, v;
  std::vector<const float*> g;
  std::vector<std::size_t> sizes;
  visit_parameters(model, [&](const std::string&, float* d, std::size_t n) {
    p.push_back(d);
    sizes.push_back(n);
  });
  visit_parameters(m1_, [&](const std::string&, float* d, std::size_t) { m.push_back(d); });
  visit_parameters(m2_, [&](const std::string&, float* d, std::size_t) { v.push_back(d); });
  visit_parameters(grad, [&](const std::string&, const float* d, std::size_t) { g.push_back(d); });

  for (std::size_t blk = 0; blk < p.size(); ++blk) {
    for (std::size_t i = 0; i < sizes[blk]; ++i) {
      const float gi = g[blk][i];
      m[blk][i] = b1 * m[blk][i] + (1.f - b1) * gi;
      v[blk][i] = b2 * v[blk][i] + (1.f - b2) * gi * gi;
      p[blk][i] *= decay;
      p[blk][i] -= step_size * m[blk][i] / (std::sqrt(v[blk][i]) * inv_sqrt_c2 + eps);
    }
  }
}

namespace {

RowMatrixXf gather_rows(const EmbeddingMatrix& e, const std::vector<Index>& rows,
                        std::size_t begin, std::size_t end, const std::vector<std::size_t>& order) {
  RowMatrixXf out(static_cast<Index>(end - begin), e.dim());
  for (std::size_t i = begin; i < end; ++i) {
    out.row(static_cast<Index>(i - begin)) = e.data.row(rows[order[i]]);
  }
  return out;
}

}  // namespace

TrainReport train(AssocModelF& model, const AssocPairSet& pairs, const EmbeddingMatrix& embeddings,
                  const TrainConfig& config) {
  config.validate();
  if (embeddings.dim() != model.dim()) {
    throw Error(ErrorKind::DimMismatch, "embedding dim " + std::to_string(embeddings.dim()) +
                                            " != model dim " + std::to_string(model.dim()));
  }
  const ResolvedPairs resolved = resolve_pairs(pairs, embeddings);
  const std::size_t n_pairs = resolved.size();
  if (static_cast<std::size_t>(config.batch_size) > n_pairs) {
    throw Error(ErrorKind::InvalidArgument, "batch_size " + std::to_string(config.batch_size) +
                                                " exceeds pair count " + std::to_string(n_pairs));
  }
  if (config.negative_mode == NegativeMode::RandomSampled && embeddings.rows() < 3) {
    throw Error(ErrorKind::InvalidArgument, "random_sampled negatives need at least 3 passages");
  }

  TrainReport report;
  if (config.epochs == 0) return report;

  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<Index> any_row(0, embeddings.rows() - 1);
  AdamW optimizer(model, config);
  std::vector<std::size_t> order(n_pairs);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t bsz = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = learning_rate_at(config, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    std::size_t seen = 0;
    for (std::size_t begin = 0; begin < n_pairs; begin += bsz) {
      const std::size_t end = std::min(begin + bsz, n_pairs);
      if (end - begin < 2) continue;

      PairBatch<float> batch;
      batch.left = gather_rows(embeddings, resolved.left, begin, end, order);
      batch.right = gather_rows(embeddings, resolved.right, begin, end, order);
      if (config.negative_mode == NegativeMode::RandomSampled) {
        const Index b = static_cast<Index>(end - begin);
        batch.negative_index.resize(b, b - 1);
        std::vector<Index> unique_rows;
        std::unordered_map<Index, Index> local;
        for (Index i = 0; i < b; ++i) {
          const std::size_t pi = order[begin + static_cast<std::size_t>(i)];
          for (Index j = 0; j + 1 < b; ++j) {
            Index r;
            do {
              r = any_row(rng);
            } while (r == resolved.left[pi] || r == resolved.right[pi]);
            auto [it, inserted] = local.emplace(r, static_cast<Index>(unique_rows.size()));
            if (inserted) unique_rows.push_back(r);
            batch.negative_index(i, j) = it->second;
          }
        }
        batch.negatives.resize(static_cast<Index>(unique_rows.size()), embeddings.dim());
        for (std::size_t u = 0; u < unique_rows.size(); ++u) {
          batch.negatives.row(static_cast<Index>(u)) = embeddings.data.row(unique_rows[u]);
        }
      }

      auto lg = loss_and_gradient(model, batch, config.temperature, config.negative_mode);
      optimizer.step(model, lg.grad, lr);
      loss_sum += lg.loss * static_cast<double>(end - begin);
      seen += end - begin;
    }
    report.epoch_loss.push_back(seen ? loss_sum / static_cast<double>(seen) : 0.0);
    ++report.epochs_run;
  }

  report.final_train_accuracy = training_accuracy(model, pairs, embeddings, config.batch_size);
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

double training_accuracy(const AssocModelF& model, const AssocPairSet& pairs,
                         const EmbeddingMatrix& embeddings, Index batch_size) {
  if (batch_size < 2) throw Error(ErrorKind::InvalidArgument, "batch_size must be >= 2");
  const ResolvedPairs resolved = resolve_pairs(pairs, embeddings);
  const std::size_t n = resolved.size();
  if (static_cast<std::size_t>(batch_size) > n) {
    throw Error(ErrorKind::InvalidArgument, "batch_size exceeds pair count");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t bsz = static_cast<std::size_t>(batch_size);

  std::size_t hits = 0, total = 0;
  for (std::size_t begin = 0; begin < n; begin += bsz) {
    const std::size_t end = std::min(begin + bsz, n);
    if (end - begin < 2) continue;
    const RowMatrixXf a = gather_rows(embeddings, resolved.left, begin, end, order);
    const RowMatrixXf b = gather_rows(embeddings, resolved.right, begin, end, order);
    const RowMatrixXf s = similarity_logits(model, a, b, 1.0);
    for (Index i = 0; i < s.rows(); ++i) {
      Index best_row = 0, best_col = 0;
      s.row(i).maxCoeff(&best_row);
      s.col(i).maxCoeff(&best_col);
      hits += (best_row == i) + (best_col == i);
    }
    total += 2 * static_cast<std::size_t>(s.rows());
  }
  return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

}  // namespace aar
