#ifndef AAR_EMBEDDING_STORE_HPP
#define AAR_EMBEDDING_STORE_HPP

#include "aar/common.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace aar {

/// Bidirectional id <-> row map. Ids are unique.
class IdMap {
 public:
  IdMap() = default;
  explicit IdMap(std::vector<std::string> ids);

  Index size() const { return static_cast<Index>(ids_.size()); }
  const std::string& id(Index row) const { return ids_.at(static_cast<std::size_t>(row)); }
  std::optional<Index> find(const std::string& id) const;
  /// Throws UnknownId.
  Index row(const std::string& id) const;
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, Index> rows_;
};

/// N x d float32 row store with stable ids.
struct EmbeddingMatrix {
  RowMatrixXf data;
  IdMap ids;
  bool normalized = false;

  Index rows() const { return data.rows(); }
  Index dim() const { return data.cols(); }
  std::span<const float> row(Index i) const {
    return {data.data() + i * data.cols(), static_cast<std::size_t>(data.cols())};
  }
};

/// Validates the invariants (id count, finiteness, unit norm when flagged).
EmbeddingMatrix make_matrix(RowMatrixXf data, std::vector<std::string> ids, bool normalized,
                            bool check_norm = true);

struct LoadOptions {
  std::optional<Index> expect_dim;
  bool check_norm = true;
  double norm_tolerance = 1e-4;
};

/// Reads the "AARE" binary format:
///
///   magic "AARE" | version u32 | N u64 | d u32 | normalized u8 |
///   N x (len u32, utf-8 bytes) | N*d float32
///
/// All integers and floats are little-endian.
EmbeddingMatrix load_matrix(const std::filesystem::path& path, const LoadOptions& options = {});
void save_matrix(const std::filesystem::path& path, const EmbeddingMatrix& m);

/// One id per line, in row order.
void save_id_sidecar(const std::filesystem::path& path, const EmbeddingMatrix& m);

EmbeddingMatrix l2_normalize_rows(const EmbeddingMatrix& m);

}  // namespace aar

#endif  // AAR_EMBEDDING_STORE_HPP
