#ifndef AAR_TESTS_SUPPORT_HPP
#define AAR_TESTS_SUPPORT_HPP

#include "aar/assoc_model.hpp"
#include "aar/common.hpp"
#include "aar/embedding_store.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace aar::test {

inline std::vector<std::string> make_ids(Index n, const std::string& prefix = "p") {
  std::vector<std::string> ids;
  for (Index i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i));
  return ids;
}

inline RowMatrixXf gaussian_rows(Index n, Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  RowMatrixXf m(n, d);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(normal(rng));
  return m;
}

/// Random unit rows with ids p0..p{n-1}.
inline EmbeddingMatrix unit_matrix(Index n, Index d, std::uint64_t seed,
                                   const std::string& prefix = "p") {
  std::mt19937_64 rng(seed);
  EmbeddingMatrix raw = make_matrix(gaussian_rows(n, d, rng), make_ids(n, prefix), false);
  return l2_normalize_rows(raw);
}

/// Model with every parameter drawn from N(0, scale^2) (norm scales around 1).
template <typename Scalar>
AssocModel<Scalar> random_model(Index d, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  AssocModel<Scalar> m = AssocModel<Scalar>::zeros(d);
  visit_parameters(m, [&](const std::string& name, Scalar* p, std::size_t n) {
    const double offset = name.find(".scale") != std::string::npos ? 1.0 : 0.0;
    for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<Scalar>(offset + normal(rng));
  });
  return m;
}

/// Model whose residual path dominates: alpha = logistic(20).
inline AssocModelF identity_model(Index d, std::uint64_t seed = 1) {
  AssocModelF m = init_model(d, seed);
  m.alpha_raw = 20.f;
  return m;
}

/// Scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("aar_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// Independent reference: plain loops in extended precision, sharing nothing
// with the Eigen implementation except the parameter values.

using Real = long double;
using RealVec = std::vector<Real>;

struct RefModel {
  int d = 0;
  std::vector<RealVec> w;  // 4 blocks, out x in, row-major
  std::vector<RealVec> b;
  std::vector<RealVec> scale, shift;
  Real alpha_raw = 0;

  /// Every parameter in checkpoint order.
  std::vector<Real*> parameters() {
    std::vector<Real*> out;
    for (int l = 0; l < 4; ++l) {
      for (auto& v : w[l]) out.push_back(&v);
      for (auto& v : b[l]) out.push_back(&v);
    }
    for (int n = 0; n < 3; ++n) {
      for (auto& v : scale[n]) out.push_back(&v);
      for (auto& v : shift[n]) out.push_back(&v);
    }
    out.push_back(&alpha_raw);
    return out;
  }
};

template <typename Scalar>
RefModel to_ref(const AssocModel<Scalar>& m) {
  auto copy = [](const auto& x) { return RealVec(x.data(), x.data() + x.size()); };
  RefModel r;
  r.d = static_cast<int>(m.dim());
  for (int l = 0; l < 4; ++l) {
    r.w.push_back(copy(m.weight[l]));
    r.b.push_back(copy(m.bias[l]));
  }
  for (int n = 0; n < 3; ++n) {
    r.scale.push_back(copy(m.norm_scale[n]));
    r.shift.push_back(copy(m.norm_shift[n]));
  }
  r.alpha_raw = static_cast<Real>(m.alpha_raw);
  return r;
}

inline RealVec ref_affine(const RefModel& m, int l, const RealVec& x) {
  RealVec y(m.d, 0.0L);
  for (int i = 0; i < m.d; ++i) {
    Real s = m.b[l][i];
    for (int j = 0; j < m.d; ++j) s += m.w[l][i * m.d + j] * x[j];
    y[i] = s;
  }
  return y;
}

inline RealVec ref_forward(const RefModel& m, const RealVec& x) {
  RealVec h = x;
  for (int l = 0; l < 3; ++l) {
    RealVec z = ref_affine(m, l, h);
    Real mean = 0;
    for (Real v : z) mean += v;
    mean /= m.d;
    Real var = 0;
    for (Real v : z) var += (v - mean) * (v - mean);
    var /= m.d;
    for (int i = 0; i < m.d; ++i) {
      const Real t = (z[i] - mean) / std::sqrt(var + 1e-5L) * m.scale[l][i] + m.shift[l][i];
      h[i] = 0.5L * t * (1.0L + std::erf(t / std::sqrt(2.0L)));
    }
  }
  const RealVec g = ref_affine(m, 3, h);
  const Real a = 1.0L / (1.0L + std::exp(-m.alpha_raw));
  RealVec u(m.d);
  Real norm = 0;
  for (int i = 0; i < m.d; ++i) {
    u[i] = a * x[i] + (1 - a) * g[i];
    norm += u[i] * u[i];
  }
  norm = std::sqrt(norm);
  for (Real& v : u) v /= norm;
  return u;
}

inline Real ref_dot(const RealVec& a, const RealVec& b) {
  Real s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <typename Derived>
RealVec to_vec(const Eigen::MatrixBase<Derived>& v) {
  RealVec out(static_cast<std::size_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) out[i] = static_cast<Real>(v(i));
  return out;
}

/// Mean over rows of logsumexp(row) - row[target[i]].
inline Real ref_row_ce(const std::vector<RealVec>& s, const std::vector<std::size_t>& target) {
  Real total = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    Real m = s[i][0];
    for (Real v : s[i]) m = std::max(m, v);
    Real sum = 0;
    for (Real v : s[i]) sum += std::exp(v - m);
    total += m + std::log(sum) - s[i][target[i]];
  }
  return total / static_cast<Real>(s.size());
}

/// 1/2 [CE(S) + CE(S^T)] for S(i, j) = f(a_i) . f(b_j) / tau, diagonal targets.
inline Real ref_symmetric_loss(const RefModel& m, const std::vector<RealVec>& a,
                               const std::vector<RealVec>& b, Real tau) {
  const std::size_t n = a.size();
  std::vector<RealVec> fa, fb;
  for (const auto& x : a) fa.push_back(ref_forward(m, x));
  for (const auto& x : b) fb.push_back(ref_forward(m, x));
  std::vector<RealVec> s(n, RealVec(n)), t(n, RealVec(n));
  std::vector<std::size_t> diag(n);
  for (std::size_t i = 0; i < n; ++i) {
    diag[i] = i;
    for (std::size_t j = 0; j < n; ++j) {
      s[i][j] = ref_dot(fa[i], fb[j]) / tau;
      t[j][i] = s[i][j];
    }
  }
  return 0.5L * (ref_row_ce(s, diag) + ref_row_ce(t, diag));
}

/// Row i = [f(a_i) . f(b_i), f(a_i) . f(n_{idx(i, j)}) ...] / tau, target column 0.
inline Real ref_sampled_loss(const RefModel& m, const std::vector<RealVec>& a,
                             const std::vector<RealVec>& b, const std::vector<RealVec>& neg,
                             const std::vector<std::vector<Index>>& idx, Real tau) {
  std::vector<RealVec> fn;
  for (const auto& x : neg) fn.push_back(ref_forward(m, x));
  std::vector<RealVec> s;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const RealVec fa = ref_forward(m, a[i]);
    RealVec row = {ref_dot(fa, ref_forward(m, b[i])) / tau};
    for (Index j : idx[i]) row.push_back(ref_dot(fa, fn[static_cast<std::size_t>(j)]) / tau);
    s.push_back(std::move(row));
  }
  return ref_row_ce(s, std::vector<std::size_t>(a.size(), 0));
}

}  // namespace aar::test

#endif  // AAR_TESTS_SUPPORT_HPP
