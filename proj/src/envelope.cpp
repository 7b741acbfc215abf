#include "nli/envelope.hpp"

#include <bit>
#include <fstream>
#include <random>
#include <sstream>
#include <system_error>

#include "nli/error.hpp"
#include "nli/hash.hpp"

namespace nli {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kHeaderSize = 8 + 4 + 4 + 8 + 8;

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(std::string_view in, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[i])) << (8 * i);
  return v;
}

}  // namespace

void write_envelope(const fs::path& path, const Magic& magic, std::uint32_t version,
                    std::string_view payload) {
  std::string header(magic.data(), magic.size());
  put_le(header, version, 4);
  put_le(header, 0, 4);
  put_le(header, payload.size(), 8);
  put_le(header, fnv1a(payload), 8);

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::random_device rd;
  fs::path tmp = path;
  tmp += ".tmp" + to_hex((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw DataError("write failed: " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

std::string read_envelope(const fs::path& path, const Magic& magic, std::uint32_t max_version,
                          std::uint32_t* version_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string data = ss.str();
  const std::string_view view(data);

  if (view.size() < 8 || view.substr(0, 8) != std::string_view(magic.data(), 8)) {
    throw DataError(path.string() + ": bad magic, not a " +
                    std::string(magic.data(), magic[7] ? 8 : 7) + " file");
  }
  if (view.size() < kHeaderSize) throw ChecksumError(path.string() + ": truncated header");
  const auto version = static_cast<std::uint32_t>(get_le(view.substr(8), 4));
  if (version > max_version) {
    throw VersionError(path.string() + ": format version " + std::to_string(version) +
                       " is newer than supported version " + std::to_string(max_version));
  }
  const std::uint64_t size = get_le(view.substr(16), 8);
  const std::uint64_t checksum = get_le(view.substr(24), 8);
  const std::string_view payload = view.substr(kHeaderSize);
  if (payload.size() != size) {
    throw ChecksumError(path.string() + ": payload is " + std::to_string(payload.size()) +
                        " bytes, header says " + std::to_string(size) + " (truncated?)");
  }
  if (fnv1a(payload) != checksum) throw ChecksumError(path.string() + ": checksum mismatch");
  if (version_out) *version_out = version;
  return std::string(payload);
}

void PayloadWriter::u32(std::uint32_t v) { put_le(buf_, v, 4); }
void PayloadWriter::u64(std::uint64_t v) { put_le(buf_, v, 8); }
void PayloadWriter::f64(double v) { put_le(buf_, std::bit_cast<std::uint64_t>(v), 8); }

void PayloadWriter::bytes(std::string_view s) {
  u64(s.size());
  buf_.append(s);
}

void PayloadWriter::matrix(const Eigen::MatrixXd& m) {
  u64(static_cast<std::uint64_t>(m.rows()));
  u64(static_cast<std::uint64_t>(m.cols()));
  buf_.reserve(buf_.size() + 8 * static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
  }
}

std::string_view PayloadReader::take(std::size_t n) {
  if (n > data_.size() - pos_) throw ChecksumError("payload ends early");
  auto s = data_.substr(pos_, n);
  pos_ += n;
  return s;
}

std::uint32_t PayloadReader::u32() { return static_cast<std::uint32_t>(get_le(take(4), 4)); }
std::uint64_t PayloadReader::u64() { return get_le(take(8), 8); }
double PayloadReader::f64() { return std::bit_cast<double>(get_le(take(8), 8)); }

std::string PayloadReader::bytes() {
  const std::uint64_t n = u64();
  return std::string(take(n));
}

Eigen::MatrixXd PayloadReader::matrix() {
  const std::uint64_t rows = u64();
  const std::uint64_t cols = u64();
  if (cols != 0 && rows > (data_.size() - pos_) / 8 / cols) throw ChecksumError("matrix larger than payload");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = f64();
  }
  return m;
}

}  // namespace nli
