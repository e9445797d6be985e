#include "aar/embedding_store.hpp"

#include "aar/io.hpp"

#include <cmath>

namespace aar {

namespace {

constexpr char kMagic[4] = {'A', 'A', 'R', 'E'};
constexpr std::uint32_t kVersion = 1;

void check_unit_norm(const EmbeddingMatrix& m, double tol) {
  for (Index i = 0; i < m.rows(); ++i) {
    const double n = m.data.row(i).cast<double>().norm();
    if (std::abs(n - 1.0) > tol) {
      throw Error(ErrorKind::InvalidArgument,
                  "row '" + m.ids.id(i) + "' has norm " + std::to_string(n) +
                      " but the matrix is flagged normalized");
    }
  }
}

}  // namespace

IdMap::IdMap(std::vector<std::string> ids) : ids_(std::move(ids)) {
  rows_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!rows_.emplace(ids_[i], static_cast<Index>(i)).second) {
      throw Error(ErrorKind::DuplicateId, "duplicate id '" + ids_[i] + "'");
    }
  }
}

std::optional<Index> IdMap::find(const std::string& id) const {
  auto it = rows_.find(id);
  if (it == rows_.end()) return std::nullopt;
  return it->second;
}

Index IdMap::row(const std::string& id) const {
  auto it = rows_.find(id);
  if (it == rows_.end()) throw Error(ErrorKind::UnknownId, "unknown id '" + id + "'");
  return it->second;
}

EmbeddingMatrix make_matrix(RowMatrixXf data, std::vector<std::string> ids, bool normalized,
                            bool check_norm) {
  if (static_cast<Index>(ids.size()) != data.rows()) {
    throw Error(ErrorKind::InvalidArgument, "id count " + std::to_string(ids.size()) +
                                                " does not match row count " +
                                                std::to_string(data.rows()));
  }
  EmbeddingMatrix m{std::move(data), IdMap(std::move(ids)), normalized};
  if (!m.data.allFinite()) throw Error(ErrorKind::NonFinite, "matrix contains NaN or Inf");
  if (normalized && check_norm) check_unit_norm(m, 1e-4);
  return m;
}

EmbeddingMatrix load_matrix(const std::filesystem::path& path, const LoadOptions& options) {
  io::ByteReader in(io::read_file(path));
  std::string magic;
  try {
    magic = in.get_bytes(4);
  } catch (const Error&) {
    throw Error(ErrorKind::MalformedHeader, path.string() + ": file too short for header");
  }
  if (magic != std::string(kMagic, 4)) {
    throw Error(ErrorKind::MalformedHeader, path.string() + ": bad magic");
  }
  std::uint32_t version = 0;
  std::uint64_t n = 0;
  std::uint32_t d = 0;
  std::uint8_t normalized = 0;
  try {
    version = in.get<std::uint32_t>();
    n = in.get<std::uint64_t>();
    d = in.get<std::uint32_t>();
    normalized = in.get<std::uint8_t>();
  } catch (const Error&) {
    throw Error(ErrorKind::MalformedHeader, path.string() + ": truncated header");
  }
  if (version != kVersion) {
    throw Error(ErrorKind::VersionMismatch,
                path.string() + ": unsupported version " + std::to_string(version));
  }
  if (normalized > 1) throw Error(ErrorKind::MalformedHeader, path.string() + ": bad flag");
  if (options.expect_dim && static_cast<Index>(d) != *options.expect_dim) {
    throw Error(ErrorKind::DimMismatch, path.string() + ": dim " + std::to_string(d) +
                                            ", expected " + std::to_string(*options.expect_dim));
  }
  // Each id needs at least its 4-byte length prefix.
  if (n > in.remaining() / 4) {
    throw Error(ErrorKind::MalformedHeader, path.string() + ": row count exceeds file size");
  }

  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto len = in.get<std::uint32_t>();
    ids.push_back(in.get_bytes(len));
  }
  if (in.remaining() != n * d * sizeof(float)) {
    throw Error(ErrorKind::CorruptFile, path.string() + ": payload size mismatch");
  }
  RowMatrixXf data(static_cast<Index>(n), static_cast<Index>(d));
  in.get_floats(data.data(), static_cast<std::size_t>(n) * d);

  IdMap map(std::move(ids));
  EmbeddingMatrix m{std::move(data), std::move(map), normalized == 1};
  if (!m.data.allFinite()) {
    throw Error(ErrorKind::NonFinite, path.string() + ": NaN or Inf in payload");
  }
  if (m.normalized && options.check_norm) check_unit_norm(m, options.norm_tolerance);
  return m;
}

void save_matrix(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  io::ByteWriter out;
  out.put_bytes(std::string_view(kMagic, 4));
  out.put<std::uint32_t>(kVersion);
  out.put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(m.dim()));
  out.put<std::uint8_t>(m.normalized ? 1 : 0);
  for (const auto& id : m.ids.ids()) {
    out.put<std::uint32_t>(static_cast<std::uint32_t>(id.size()));
    out.put_bytes(id);
  }
  out.put_floats(m.data.data(), static_cast<std::size_t>(m.data.size()));
  io::write_file_atomic(path, out.bytes());
}

void save_id_sidecar(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  std::string text;
  for (const auto& id : m.ids.ids()) {
    text += id;
    text += '\n';
  }
  io::write_text_atomic(path, text);
}

EmbeddingMatrix l2_normalize_rows(const EmbeddingMatrix& m) {
  EmbeddingMatrix out = m;
  for (Index i = 0; i < out.rows(); ++i) {
    // Norm in double so already-unit rows come back unchanged to float precision.
    const double n = out.data.row(i).cast<double>().norm();
    if (n == 0.0) throw Error(ErrorKind::ZeroRow, "row '" + m.ids.id(i) + "' is all zeros");
    out.data.row(i) = (out.data.row(i).cast<double>() / n).cast<float>();
  }
  out.normalized = true;
  return out;
}

}  // namespace aar
