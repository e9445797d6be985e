#ifndef AAR_TRAINER_HPP
#define AAR_TRAINER_HPP

#include "aar/assoc_model.hpp"
#include "aar/common.hpp"
#include "aar/embedding_store.hpp"
#include "aar/pair_data.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace aar {

enum class NegativeMode { InBatch, RandomSampled };
NegativeMode parse_negative_mode(const std::string& s);
const char* to_string(NegativeMode m);

struct TrainConfig {
  Index batch_size = 512;
  double temperature = 0.05;
  double learning_rate = 3e-4;
  int epochs = 100;
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  NegativeMode negative_mode = NegativeMode::InBatch;
  double min_lr_fraction = 0.0;

  /// Throws InvalidArgument on a violated invariant.
  void validate() const;
};

/// Applies "key = value" entries (keys as the field names) onto `config`.
/// Unknown keys are an error.
void apply_train_settings(TrainConfig& config, const std::map<std::string, std::string>& kv);

struct TrainReport {
  std::vector<double> epoch_loss;
  double final_train_accuracy = 0;
  double wall_time_seconds = 0;
  int epochs_run = 0;
};

nlohmann::json to_json(const TrainReport& r, bool include_timing = true);

/// Cosine annealing over epochs: base at epoch 0, min_lr_fraction * base at the
/// last epoch.
double learning_rate_at(const TrainConfig& config, int epoch);

/// S(i, j) = f(a_i) . f(b_j) / tau, both sides transformed.
template <typename Scalar>
RowMatrix<Scalar> similarity_logits(const AssocModel<Scalar>& model, const RowMatrix<Scalar>& a,
                                    const RowMatrix<Scalar>& b, double temperature) {
  if (!(temperature > 0)) throw Error(ErrorKind::InvalidArgument, "temperature must be > 0");
  if (a.rows() != b.rows()) {
    throw Error(ErrorKind::InvalidArgument, "batch sizes differ");
  }
  ForwardCache<Scalar> ca, cb;
  forward_batch(model, a, ca);
  forward_batch(model, b, cb);
  return (ca.output * cb.output.transpose()) / static_cast<Scalar>(temperature);
}

namespace detail {

/// Mean over rows of logsumexp(row) - row[target(row)]; the probability
/// matrix softmax(row) is written to `probs`. Accumulates in double.
template <typename Scalar, typename Target>
double row_cross_entropy(const RowMatrix<Scalar>& logits, Target target, RowMatrix<Scalar>* probs) {
  double total = 0;
  if (probs) probs->resize(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const RowVector<double> row = logits.row(i).template cast<double>();
    const double m = row.maxCoeff();
    const double sum = (row.array() - m).exp().sum();
    const double lse = m + std::log(sum);
    total += lse - row(target(i));
    if (probs) probs->row(i) = ((row.array() - lse).exp()).matrix().template cast<Scalar>();
  }
  return logits.rows() ? total / static_cast<double>(logits.rows()) : 0.0;
}

}  // namespace detail

/// 1/2 [CE(S, y) + CE(S^T, y)], y = diagonal.
template <typename Scalar>
double symmetric_ce_loss(const RowMatrix<Scalar>& logits) {
  if (logits.rows() != logits.cols()) {
    throw Error(ErrorKind::InvalidArgument, "logits must be square");
  }
  auto diag = [](Index i) { return i; };
  const RowMatrix<Scalar> t = logits.transpose();
  RowMatrix<Scalar>* no_probs = nullptr;
  return 0.5 * (detail::row_cross_entropy(logits, diag, no_probs) +
                detail::row_cross_entropy(t, diag, no_probs));
}

/// Embedding rows for one optimization step.
///
/// In-batch mode uses `left` and `right` only. In random-sampled mode row i of
/// `negative_index` names B-1 rows of `negatives` contrasted against pair i.
template <typename Scalar>
struct PairBatch {
  RowMatrix<Scalar> left;
  RowMatrix<Scalar> right;
  RowMatrix<Scalar> negatives;
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> negative_index;

  Index size() const { return left.rows(); }
};

template <typename Scalar>
struct LossAndGradient {
  double loss = 0;
  AssocModel<Scalar> grad;
};

/// Loss of one batch and its gradient with respect to every parameter.
template <typename Scalar>
LossAndGradient<Scalar> loss_and_gradient(const AssocModel<Scalar>& model,
                                          const PairBatch<Scalar>& batch, double temperature,
                                          NegativeMode mode = NegativeMode::InBatch) {
  const Index b = batch.size();
  if (b < 2) throw Error(ErrorKind::InvalidArgument, "contrastive batch needs B >= 2");
  if (batch.right.rows() != b) throw Error(ErrorKind::InvalidArgument, "batch sizes differ");
  if (!(temperature > 0)) throw Error(ErrorKind::InvalidArgument, "temperature must be > 0");
  const Scalar inv_tau = static_cast<Scalar>(1.0 / temperature);

  LossAndGradient<Scalar> out{0, AssocModel<Scalar>::zeros(model.dim())};
  ForwardCache<Scalar> cl, cr;
  forward_batch(model, batch.left, cl);
  forward_batch(model, batch.right, cr);

  if (mode == NegativeMode::InBatch) {
    const RowMatrix<Scalar> logits = (cl.output * cr.output.transpose()) * inv_tau;
    const RowMatrix<Scalar> logits_t = logits.transpose();
    RowMatrix<Scalar> p_row, p_col;
    auto diag = [](Index i) { return i; };
    out.loss = 0.5 * (detail::row_cross_entropy(logits, diag, &p_row) +
                      detail::row_cross_entropy(logits_t, diag, &p_col));
    // dL/dS = [(softmax_rows - I) + (softmax_cols - I)] / (2B)
    RowMatrix<Scalar> d_logits = p_row + p_col.transpose();
    d_logits.diagonal().array() -= Scalar(2);
    d_logits /= static_cast<Scalar>(2 * b);
    const RowMatrix<Scalar> d_left = (d_logits * cr.output) * inv_tau;
    const RowMatrix<Scalar> d_right = (d_logits.transpose() * cl.output) * inv_tau;
    backward_batch(model, cl, d_left, out.grad);
    backward_batch(model, cr, d_right, out.grad);
  } else {
    if (batch.negative_index.rows() != b || batch.negative_index.cols() != b - 1) {
      throw Error(ErrorKind::InvalidArgument, "negative_index must be B x (B-1)");
    }
    ForwardCache<Scalar> cn;
    forward_batch(model, batch.negatives, cn);
    // Row i: [positive, negatives...], target column 0.
    RowMatrix<Scalar> logits(b, b);
    for (Index i = 0; i < b; ++i) {
      logits(i, 0) = cl.output.row(i).dot(cr.output.row(i)) * inv_tau;
      for (Index j = 0; j + 1 < b; ++j) {
        logits(i, j + 1) = cl.output.row(i).dot(cn.output.row(batch.negative_index(i, j))) * inv_tau;
      }
    }
    RowMatrix<Scalar> probs;
    out.loss = detail::row_cross_entropy(logits, [](Index) { return Index{0}; }, &probs);
    RowMatrix<Scalar> d_logits = probs;
    d_logits.col(0).array() -= Scalar(1);
    d_logits /= static_cast<Scalar>(b);

    RowMatrix<Scalar> d_left = RowMatrix<Scalar>::Zero(b, model.dim());
    RowMatrix<Scalar> d_right = RowMatrix<Scalar>::Zero(b, model.dim());
    RowMatrix<Scalar> d_neg = RowMatrix<Scalar>::Zero(batch.negatives.rows(), model.dim());
    for (Index i = 0; i < b; ++i) {
      d_left.row(i) += d_logits(i, 0) * inv_tau * cr.output.row(i);
      d_right.row(i) += d_logits(i, 0) * inv_tau * cl.output.row(i);
      for (Index j = 0; j + 1 < b; ++j) {
        const Index r = batch.negative_index(i, j);
        d_left.row(i) += d_logits(i, j + 1) * inv_tau * cn.output.row(r);
        d_neg.row(r) += d_logits(i, j + 1) * inv_tau * cl.output.row(i);
      }
    }
    backward_batch(model, cl, d_left, out.grad);
    backward_batch(model, cr, d_right, out.grad);
    backward_batch(model, cn, d_neg, out.grad);
  }

  visit_parameters(out.grad, [](const std::string& name, const Scalar* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(data[i])) {
        throw Error(ErrorKind::NonFinite, "non-finite gradient in " + name);
      }
    }
  });
  return out;
}

/// Pairs resolved to row indices of an embedding matrix.
struct ResolvedPairs {
  std::vector<Index> left;
  std::vector<Index> right;

  std::size_t size() const { return left.size(); }
};

/// Throws UnknownId.
ResolvedPairs resolve_pairs(const AssocPairSet& pairs, const EmbeddingMatrix& embeddings);

/// Decoupled-weight-decay Adam state over every parameter of an AssocModelF.
class AdamW {
 public:
  AdamW(const AssocModelF& model, const TrainConfig& config);

  /// p <- p - lr * wd * p, then the bias-corrected Adam update.
  void step(AssocModelF& model, const AssocModelF& grad, double learning_rate);

  std::int64_t steps() const { return steps_; }

 private:
  AssocModelF m1_;
  AssocModelF m2_;
  double beta1_, beta2_, eps_, weight_decay_;
  std::int64_t steps_ = 0;
};

/// Training; modifies `model` in place.
TrainReport train(AssocModelF& model, const AssocPairSet& pairs, const EmbeddingMatrix& embeddings,
                  const TrainConfig& config);

/// Over consecutive batches of the pair list: fraction of rows whose diagonal
/// entry is the row argmax, averaged with the column analogue.
double training_accuracy(const AssocModelF& model, const AssocPairSet& pairs,
                         const EmbeddingMatrix& embeddings, Index batch_size);

}  // namespace aar

#endif  // AAR_TRAINER_HPP
