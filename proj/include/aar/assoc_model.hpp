#ifndef AAR_ASSOC_MODEL_HPP
#define AAR_ASSOC_MODEL_HPP

#include "aar/common.hpp"
#include "aar/embedding_store.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

namespace aar {

/// Residual association map
///
///   f(x) = normalize(alpha * x + (1 - alpha) * g(x)),
///   g    = [affine -> layer norm -> GELU] x 3 -> affine,
///
/// with every affine map d -> d and alpha = logistic(alpha_raw). Weights are
/// stored out x in, so a layer computes W x + b.
///
/// The same struct doubles as the gradient accumulator during training.
template <typename Scalar>
struct AssocModel {
  static constexpr int kLayers = 4;
  static constexpr int kNorms = 3;

  std::array<RowMatrix<Scalar>, kLayers> weight;
  std::array<Vector<Scalar>, kLayers> bias;
  std::array<Vector<Scalar>, kNorms> norm_scale;
  std::array<Vector<Scalar>, kNorms> norm_shift;
  Scalar alpha_raw = 0;

  Index dim() const { return weight[0].cols(); }
  Scalar alpha() const { return Scalar(1) / (Scalar(1) + std::exp(-alpha_raw)); }

  static AssocModel zeros(Index d) {
    AssocModel m;
    for (int l = 0; l < kLayers; ++l) {
      m.weight[l] = RowMatrix<Scalar>::Zero(d, d);
      m.bias[l] = Vector<Scalar>::Zero(d);
    }
    for (int n = 0; n < kNorms; ++n) {
      m.norm_scale[n] = Vector<Scalar>::Zero(d);
      m.norm_shift[n] = Vector<Scalar>::Zero(d);
    }
    return m;
  }

  template <typename Other>
  AssocModel<Other> cast() const {
    AssocModel<Other> m;
    for (int l = 0; l < kLayers; ++l) {
      m.weight[l] = weight[l].template cast<Other>();
      m.bias[l] = bias[l].template cast<Other>();
    }
    for (int n = 0; n < kNorms; ++n) {
      m.norm_scale[n] = norm_scale[n].template cast<Other>();
      m.norm_shift[n] = norm_shift[n].template cast<Other>();
    }
    m.alpha_raw = static_cast<Other>(alpha_raw);
    return m;
  }
};

using AssocModelF = AssocModel<float>;
using AssocModelD = AssocModel<double>;

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kDegenerateNorm = 1e-12;

/// 4(d^2 + d) + 3(2d) + 1.
constexpr std::uint64_t param_count(std::uint64_t d) { return 4 * (d * d + d) + 6 * d + 1; }

template <typename Scalar>
std::uint64_t param_count(const AssocModel<Scalar>& m) {
  return param_count(static_cast<std::uint64_t>(m.dim()));
}

/// Calls fn(name, pointer, count) for every parameter block in checkpoint order:
/// layer0.weight, layer0.bias, ..., layer3.bias, norm0.scale, norm0.shift, ...,
/// norm2.shift, alpha_raw. Works on const and mutable models.
template <typename Model, typename Fn>
void visit_parameters(Model& m, Fn&& fn) {
  for (int l = 0; l < 4; ++l) {
    fn("layer" + std::to_string(l) + ".weight", m.weight[l].data(),
       static_cast<std::size_t>(m.weight[l].size()));
    fn("layer" + std::to_string(l) + ".bias", m.bias[l].data(),
       static_cast<std::size_t>(m.bias[l].size()));
  }
  for (int n = 0; n < 3; ++n) {
    fn("norm" + std::to_string(n) + ".scale", m.norm_scale[n].data(),
       static_cast<std::size_t>(m.norm_scale[n].size()));
    fn("norm" + std::to_string(n) + ".shift", m.norm_shift[n].data(),
       static_cast<std::size_t>(m.norm_shift[n].size()));
  }
  fn(std::string("alpha_raw"), &m.alpha_raw, std::size_t{1});
}

/// Uniform(-1/sqrt(d), 1/sqrt(d)) weights, zero biases, unit scales, alpha = 0.5.
AssocModelF init_model(Index d, std::uint64_t seed);

template <typename Scalar>
Scalar gelu(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x * Scalar(std::numbers::sqrt2 / 2)));
}

template <typename Scalar>
Scalar gelu_grad(Scalar x) {
  const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x * Scalar(std::numbers::sqrt2 / 2)));
  const Scalar pdf = std::exp(Scalar(-0.5) * x * x) * Scalar(0.5 * std::numbers::inv_sqrtpi *
                                                             std::numbers::sqrt2);
  return cdf + x * pdf;
}

namespace detail {

template <typename Scalar, typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& v, const char* stage, int layer) {
  if (!v.allFinite()) {
    throw Error(ErrorKind::NonFinite, std::string("non-finite value after ") + stage +
                                          " of layer " + std::to_string(layer));
  }
}

}  // namespace detail

/// Result of a single forward pass. `degenerate` is set when the residual blend
/// has (near) zero norm; the output is then the zero vector.
template <typename Scalar>
struct ForwardResult {
  Vector<Scalar> output;
  bool degenerate = false;
};

template <typename Scalar, typename Derived>
ForwardResult<Scalar> forward(const AssocModel<Scalar>& m, const Eigen::MatrixBase<Derived>& x) {
  const Index d = m.dim();
  if (x.size() != d) {
    throw Error(ErrorKind::DimMismatch,
                "input dim " + std::to_string(x.size()) + " != model dim " + std::to_string(d));
  }
  const Vector<Scalar> input = x;
  detail::require_finite<Scalar>(input, "input", 0);
  Vector<Scalar> h = input;
  for (int l = 0; l < 3; ++l) {
    Vector<Scalar> z = m.weight[l] * h + m.bias[l];
    detail::require_finite<Scalar>(z, "affine", l);
    const Scalar mean = z.mean();
    const Scalar var = (z.array() - mean).square().mean();
    const Scalar inv_std = Scalar(1) / std::sqrt(var + Scalar(kLayerNormEps));
    z = ((z.array() - mean) * inv_std * m.norm_scale[l].array() + m.norm_shift[l].array())
            .matrix();
    h = z.unaryExpr([](Scalar v) { return gelu(v); });
    detail::require_finite<Scalar>(h, "activation", l);
  }
  const Vector<Scalar> g = m.weight[3] * h + m.bias[3];
  detail::require_finite<Scalar>(g, "affine", 3);

  const Scalar a = m.alpha();
  const Vector<Scalar> u = a * input + (Scalar(1) - a) * g;
  const Scalar norm = u.norm();
  if (!(norm > Scalar(kDegenerateNorm))) return {Vector<Scalar>::Zero(d), true};
  return {u / norm, false};
}

/// Intermediate values of a batched forward pass, kept for backpropagation.
template <typename Scalar>
struct ForwardCache {
  RowMatrix<Scalar> input;
  std::array<RowMatrix<Scalar>, 3> normalized;  // (h - mean) / std, per layer
  std::array<Vector<Scalar>, 3> inv_std;        // per row
  std::array<RowMatrix<Scalar>, 3> pre_activation;
  std::array<RowMatrix<Scalar>, 3> activation;
  RowMatrix<Scalar> g;
  Vector<Scalar> blend_norm;
  RowMatrix<Scalar> output;
};

/// Batched forward (one row per example). Degenerate rows are a hard error here.
template <typename Scalar>
void forward_batch(const AssocModel<Scalar>& m, const RowMatrix<Scalar>& x,
                   ForwardCache<Scalar>& c) {
  const Index d = m.dim();
  if (x.cols() != d) {
    throw Error(ErrorKind::DimMismatch,
                "input dim " + std::to_string(x.cols()) + " != model dim " + std::to_string(d));
  }
  c.input = x;
  for (int l = 0; l < 3; ++l) {
    const RowMatrix<Scalar>& in = l == 0 ? c.input : c.activation[l - 1];
    RowMatrix<Scalar> h = (in * m.weight[l].transpose()).rowwise() + m.bias[l].transpose();
    detail::require_finite<Scalar>(h, "affine", l);
    const Vector<Scalar> mean = h.rowwise().mean();
    h.colwise() -= mean;
    const Vector<Scalar> var = h.array().square().rowwise().mean();
    c.inv_std[l] = (var.array() + Scalar(kLayerNormEps)).rsqrt();
    c.normalized[l] = c.inv_std[l].asDiagonal() * h;
    c.pre_activation[l] =
        ((c.normalized[l].array().rowwise() * m.norm_scale[l].transpose().array()).rowwise() +
         m.norm_shift[l].transpose().array())
            .matrix();
    c.activation[l] = c.pre_activation[l].unaryExpr([](Scalar v) { return gelu(v); });
    detail::require_finite<Scalar>(c.activation[l], "activation", l);
  }
  c.g = (c.activation[2] * m.weight[3].transpose()).rowwise() + m.bias[3].transpose();
  detail::require_finite<Scalar>(c.g, "affine", 3);

  const Scalar a = m.alpha();
  RowMatrix<Scalar> u = a * c.input + (Scalar(1) - a) * c.g;
  c.blend_norm = u.rowwise().norm();
  for (Index i = 0; i < u.rows(); ++i) {
    if (!(c.blend_norm(i) > Scalar(kDegenerateNorm))) {
      throw Error(ErrorKind::NonFinite,
                  "degenerate residual blend (norm <= 1e-12) at batch row " + std::to_string(i));
    }
  }
  c.output = c.blend_norm.cwiseInverse().asDiagonal() * u;
}

/// Accumulates dLoss/dparams into `grad` given dLoss/doutput for a cached batch.
template <typename Scalar>
void backward_batch(const AssocModel<Scalar>& m, const ForwardCache<Scalar>& c,
                    const RowMatrix<Scalar>& d_output, AssocModel<Scalar>& grad) {
  const Index d = m.dim();
  // y = u / |u|  =>  du = (dy - y (y . dy)) / |u|
  const Vector<Scalar> radial = (c.output.array() * d_output.array()).rowwise().sum();
  RowMatrix<Scalar> d_u = d_output - radial.asDiagonal() * c.output;
  d_u = c.blend_norm.cwiseInverse().asDiagonal() * d_u;

  const Scalar a = m.alpha();
  const Scalar d_alpha = (d_u.array() * (c.input - c.g).array()).sum();
  grad.alpha_raw += d_alpha * a * (Scalar(1) - a);

  RowMatrix<Scalar> d_h = (Scalar(1) - a) * d_u;
  grad.weight[3].noalias() += d_h.transpose() * c.activation[2];
  grad.bias[3] += d_h.colwise().sum().transpose();
  RowMatrix<Scalar> d_act = d_h * m.weight[3];

  for (int l = 2; l >= 0; --l) {
    const RowMatrix<Scalar> d_pre =
        (d_act.array() *
         c.pre_activation[l].unaryExpr([](Scalar v) { return gelu_grad(v); }).array())
            .matrix();
    grad.norm_scale[l] +=
        (d_pre.array() * c.normalized[l].array()).colwise().sum().matrix().transpose();
    grad.norm_shift[l] += d_pre.colwise().sum().transpose();

    const RowMatrix<Scalar> d_norm =
        (d_pre.array().rowwise() * m.norm_scale[l].transpose().array()).matrix();
    const Vector<Scalar> mean_d = d_norm.rowwise().mean();
    const Vector<Scalar> mean_dn =
        (d_norm.array() * c.normalized[l].array()).rowwise().sum() / Scalar(d);
    d_h = d_norm;
    d_h.colwise() -= mean_d;
    d_h -= mean_dn.asDiagonal() * c.normalized[l];
    d_h = c.inv_std[l].asDiagonal() * d_h;

    const RowMatrix<Scalar>& in = l == 0 ? c.input : c.activation[l - 1];
    grad.weight[l].noalias() += d_h.transpose() * in;
    grad.bias[l] += d_h.colwise().sum().transpose();
    if (l > 0) d_act = d_h * m.weight[l];
  }
}

/// f applied to every row of a matrix, ids preserved.
struct TransformedMatrix {
  std::string source;
  EmbeddingMatrix matrix;
  std::vector<Index> degenerate_rows;
};

/// Row i is exactly forward(model, row i); rows are processed in parallel when
/// `threads != 1` (0 = hardware concurrency) without changing any value.
TransformedMatrix transform_matrix(const AssocModelF& model, const EmbeddingMatrix& m,
                                   std::string source = {}, unsigned threads = 1);

/// "AARM" checkpoint:
///
///   magic "AARM" | version u32 | d u32 | parameters (visit_parameters order) as float32
void save_model(const std::filesystem::path& path, const AssocModelF& model);
AssocModelF load_model(const std::filesystem::path& path);

}  // namespace aar

#endif  // AAR_ASSOC_MODEL_HPP
