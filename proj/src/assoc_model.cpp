#include "aar/assoc_model.hpp"

#include "aar/io.hpp"

#include <algorithm>
#include <random>
#include <thread>

namespace aar {

namespace {

constexpr char kMagic[4] = {'A', 'A', 'R', 'M'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

AssocModelF init_model(Index d, std::uint64_t seed) {
  if (d < 1) throw Error(ErrorKind::InvalidArgument, "model dim must be >= 1");
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  std::uniform_real_distribution<double> uniform(-bound, bound);

  AssocModelF m = AssocModelF::zeros(d);
  for (auto& w : m.weight) {
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<float>(uniform(rng));
  }
  for (auto& s : m.norm_scale) s.setOnes();
  m.alpha_raw = 0.f;
  return m;
}

TransformedMatrix transform_matrix(const AssocModelF& model, const EmbeddingMatrix& m,
                                   std::string source, unsigned threads) {
  if (m.dim() != model.dim()) {
    throw Error(ErrorKind::DimMismatch, "matrix dim " + std::to_string(m.dim()) +
                                            " != model dim " + std::to_string(model.dim()));
  }
  const Index n = m.rows();
  RowMatrixXf out(n, m.dim());
  std::vector<char> degenerate(static_cast<std::size_t>(n), 0);

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::clamp<Index>(threads, 1, std::max<Index>(n, 1)));
  auto work = [&](unsigned t) {
    for (Index i = t; i < n; i += threads) {
      auto r = forward(model, m.data.row(i).transpose());
      out.row(i) = r.output.transpose();
      degenerate[i] = r.degenerate ? 1 : 0;
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> workers;
    for (unsigned t = 0; t < threads; ++t) workers.emplace_back(work, t);
  }

  TransformedMatrix result;
  result.source = std::move(source);
  for (Index i = 0; i < n; ++i) {
    if (degenerate[i]) result.degenerate_rows.push_back(i);
  }
  // Degenerate rows are zero, so only flag the matrix as unit-norm when clean.
  result.matrix = EmbeddingMatrix{std::move(out), m.ids, result.degenerate_rows.empty()};
  return result;
}

void save_model(const std::filesystem::path& path, const AssocModelF& model) {
  io::ByteWriter out;
  out.put_bytes(std::string_view(kMagic, 4));
  out.put<std::uint32_t>(kVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(model.dim()));
  visit_parameters(model, [&](const std::string&, const float* data, std::size_t n) {
    out.put_floats(data, n);
  });
  io::write_file_atomic(path, out.bytes());
}

AssocModelF load_model(const std::filesystem::path& path) {
  io::ByteReader in(io::read_file(path));
  std::string magic;
  std::uint32_t version = 0;
  std::uint32_t d = 0;
  try {
    magic = in.get_bytes(4);
    version = in.get<std::uint32_t>();
    d = in.get<std::uint32_t>();
  } catch (const Error&) {
    throw Error(ErrorKind::CorruptFile, path.string() + ": truncated checkpoint header");
  }
  if (magic != std::string(kMagic, 4)) {
    throw Error(ErrorKind::CorruptFile, path.string() + ": not an AARM checkpoint");
  }
  if (version != kVersion) {
    throw Error(ErrorKind::VersionMismatch,
                path.string() + ": checkpoint version " + std::to_string(version) +
                    ", expected " + std::to_string(kVersion));
  }
  if (d == 0) throw Error(ErrorKind::CorruptFile, path.string() + ": zero model dim");
  if (in.remaining() != param_count(d) * sizeof(float)) {
    throw Error(ErrorKind::CorruptFile,
                path.string() + ": expected " + std::to_string(param_count(d)) +
                    " parameters, found " + std::to_string(in.remaining() / sizeof(float)));
  }
  AssocModelF m = AssocModelF::zeros(d);
  visit_parameters(m, [&](const std::string&, float* data, std::size_t n) {
    in.get_floats(data, n);
  });
  bool finite = true;
  visit_parameters(m, [&](const std::string&, const float* data, std::size_t n) {
    finite = finite && std::all_of(data, data + n, [](float v) { return std::isfinite(v); });
  });
  if (!finite) throw Error(ErrorKind::CorruptFile, path.string() + ": non-finite parameter");
  return m;
}

}  // namespace aar
