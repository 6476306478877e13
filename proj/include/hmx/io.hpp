#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmx {

static_assert(std::endian::native == std::endian::little,
              "serialized formats are little-endian; big-endian hosts are unsupported");

class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Growable little-endian byte sink. Used both for files and for content hashing.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void i64(std::int64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }

  void magic(const char tag[8]) { raw(tag, 8); }

  void u32s(std::span<const std::uint32_t> v) { u64(v.size()); raw(v.data(), v.size() * 4); }
  void u64s(std::span<const std::uint64_t> v) { u64(v.size()); raw(v.data(), v.size() * 8); }
  void f64s(std::span<const double> v) { u64(v.size()); raw(v.data(), v.size() * 8); }
  void str(const std::string& s) { u64(s.size()); raw(s.data(), s.size()); }

  void raw(const void* p, std::size_t len) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + len);
  }

  const std::vector<std::uint8_t>& bytes() const { return buf_; }

  void write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(buf_.data()),
              static_cast<std::streamsize>(buf_.size()));
    if (!out) throw io_error("short write: " + path);
  }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> bytes) : buf_(std::move(bytes)) {}

  static ByteReader from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw io_error("cannot open for reading: " + path);
    const auto size = in.tellg();
    in.seekg(0);
    std::vector<std::uint8_t> b(static_cast<std::size_t>(size));
    in.read(reinterpret_cast<char*>(b.data()), size);
    if (!in) throw io_error("short read: " + path);
    return ByteReader(std::move(b));
  }

  std::uint8_t u8() { std::uint8_t v; raw(&v, 1); return v; }
  std::uint32_t u32() { std::uint32_t v; raw(&v, 4); return v; }
  std::uint64_t u64() { std::uint64_t v; raw(&v, 8); return v; }
  std::int64_t i64() { std::int64_t v; raw(&v, 8); return v; }
  double f64() { double v; raw(&v, 8); return v; }

  void expect_magic(const char tag[8]) {
    char got[8];
    raw(got, 8);
    if (std::memcmp(got, tag, 8) != 0)
      throw io_error(std::string("bad or incompatible file header, expected '") +
                     std::string(tag, 8) + "'");
  }

  std::vector<std::uint32_t> u32s() { return vec<std::uint32_t>(); }
  std::vector<std::uint64_t> u64s() { return vec<std::uint64_t>(); }
  std::vector<double> f64s() { return vec<double>(); }
  std::string str() {
    const auto len = u64();
    std::string s(len, '\0');
    raw(s.data(), len);
    return s;
  }

  void raw(void* p, std::size_t len) {
    if (pos_ + len > buf_.size()) throw io_error("truncated input");
    std::memcpy(p, buf_.data() + pos_, len);
    pos_ += len;
  }

  bool at_end() const { return pos_ == buf_.size(); }

 private:
  template <class T>
  std::vector<T> vec() {
    const auto n = u64();
    if (n > (buf_.size() - pos_) / sizeof(T)) throw io_error("truncated array");
    std::vector<T> v(n);
    raw(v.data(), n * sizeof(T));
    return v;
  }

  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

/// FNV-1a over a byte range; artifact identity is content-based, not timestamp-based.
inline std::uint64_t fnv1a(std::span<const std::uint8_t> bytes,
                           std::uint64_t seed = 0xcbf29ce484222325ULL) {
  std::uint64_t h = seed;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Writes `bytes` to `path` only when the current contents differ, so reruns
/// with identical inputs leave file modification times untouched.
inline bool write_file_if_changed(const std::string& path, const ByteWriter& w) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (in) {
    const auto size = static_cast<std::size_t>(in.tellg());
    if (size == w.bytes().size()) {
      in.seekg(0);
      std::vector<std::uint8_t> cur(size);
      in.read(reinterpret_cast<char*>(cur.data()), static_cast<std::streamsize>(size));
      if (in && cur == w.bytes()) return false;
    }
  }
  w.write_file(path);
  return true;
}

}  // namespace hmx
