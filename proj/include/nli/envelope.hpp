#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace nli {

/// Versioned binary container shared by Gram caches and trained models:
///
///     magic[8] | u32 version | u32 reserved | u64 payload_size | u64 fnv1a(payload) | payload
///
/// All integers little-endian.
using Magic = std::array<char, 8>;

inline constexpr Magic kGramMagic = {'N', 'L', 'I', 'G', 'R', 'A', 'M', '\0'};
inline constexpr Magic kModelMagic = {'N', 'L', 'I', 'M', 'O', 'D', 'E', 'L'};

/// Writes via a temporary file and rename so readers never see a partial file.
void write_envelope(const std::filesystem::path& path, const Magic& magic, std::uint32_t version,
                    std::string_view payload);

/// Returns the payload. Throws VersionError for versions above `max_version`
/// and ChecksumError for truncation or corruption.
std::string read_envelope(const std::filesystem::path& path, const Magic& magic,
                          std::uint32_t max_version, std::uint32_t* version = nullptr);

class PayloadWriter {
 public:
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void bytes(std::string_view s);  // u64 length + bytes
  void matrix(const Eigen::MatrixXd& m);  // u64 rows, u64 cols, row-major f64
  const std::string& str() const noexcept { return buf_; }

 private:
  std::string buf_;
};

class PayloadReader {
 public:
  explicit PayloadReader(std::string_view data) : data_(data) {}
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string bytes();
  Eigen::MatrixXd matrix();
  bool done() const noexcept { return pos_ == data_.size(); }

 private:
  std::string_view take(std::size_t n);
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace nli
