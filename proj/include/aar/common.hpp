#ifndef AAR_COMMON_HPP
#define AAR_COMMON_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace aar {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using RowMatrixXf = RowMatrix<float>;
using RowMatrixXd = RowMatrix<double>;
using Index = Eigen::Index;

enum class ErrorKind {
  Io,
  MalformedHeader,
  DimMismatch,
  DuplicateId,
  UnknownId,
  NonFinite,
  ZeroRow,
  OutOfRange,
  InvalidArgument,
  VersionMismatch,
  CorruptFile,
  Infeasible,
  Config,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::MalformedHeader: return "malformed_header";
    case ErrorKind::DimMismatch: return "dim_mismatch";
    case ErrorKind::DuplicateId: return "duplicate_id";
    case ErrorKind::UnknownId: return "unknown_id";
    case ErrorKind::NonFinite: return "non_finite";
    case ErrorKind::ZeroRow: return "zero_row";
    case ErrorKind::OutOfRange: return "out_of_range";
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::VersionMismatch: return "version_mismatch";
    case ErrorKind::CorruptFile: return "corrupt_file";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

/// Single exception type for the library; `kind()` is stable and machine-readable.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Plain float dot product with a fixed accumulation order.
///
/// Eight independent float accumulators, folded pairwise at the end. The order
/// depends only on the length, so identical rows always produce identical
/// scores regardless of where they live in memory.
inline float dot_f32(const float* a, const float* b, std::size_t n) {
  float acc[8] = {0.f, 0.f, 0.f, 0.f, 0.f, 0.f, 0.f, 0.f};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  }
  for (std::size_t j = 0; i < n; ++i, ++j) acc[j] += a[i] * b[i];
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
}

}  // namespace aar

#endif  // AAR_COMMON_HPP
