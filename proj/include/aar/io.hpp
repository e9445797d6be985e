#ifndef AAR_IO_HPP
#define AAR_IO_HPP

#include "aar/common.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace aar::io {

/// Append-only little-endian byte sink.
class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_arithmetic_v<T>);
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
    }
    bytes_.insert(bytes_.end(), raw, raw + sizeof(T));
  }

  void put_bytes(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  void put_floats(const float* data, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
      const auto* raw = reinterpret_cast<const char*>(data);
      bytes_.insert(bytes_.end(), raw, raw + n * sizeof(float));
    } else {
      for (std::size_t i = 0; i < n; ++i) put(data[i]);
    }
  }

  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

/// Bounds-checked little-endian reader; throws CorruptFile on overrun.
class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  template <typename T>
  T get() {
    static_assert(std::is_arithmetic_v<T>);
    require(sizeof(T));
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
    }
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  std::string get_bytes(std::size_t n) {
    require(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  void get_floats(float* out, std::size_t n) {
    require(n * sizeof(float));
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out, bytes_.data() + pos_, n * sizeof(float));
      pos_ += n * sizeof(float);
    } else {
      for (std::size_t i = 0; i < n; ++i) out[i] = get<float>();
    }
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void require(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorKind::CorruptFile, "unexpected end of file at byte " + std::to_string(pos_));
    }
  }

  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

std::vector<char> read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::vector<char>& bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

/// One JSON value per non-empty line.
std::vector<nlohmann::json> read_json_lines(const std::filesystem::path& path);
std::string to_json_lines(const std::vector<nlohmann::json>& rows);

}  // namespace aar::io

#endif  // AAR_IO_HPP
