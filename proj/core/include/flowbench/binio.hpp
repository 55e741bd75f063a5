#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "flowbench/common.hpp"

namespace flowbench {

/// Little-endian append-only byte buffer for the versioned binary
/// containers (space cache, checkpoints).
class BinWriter {
 public:
  void magic(const char m[4]) { raw(m, 4); }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) { scalar(v); }
  void u64(std::uint64_t v) { scalar(v); }
  void f64(double v) { scalar(v); }

  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }

  template <typename T>
  void array(std::span<const T> xs) {
    u64(xs.size());
    for (const T& x : xs) scalar(x);
  }

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  template <typename T>
  void scalar(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    raw(buf, sizeof(T));
  }

  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }

  std::vector<std::uint8_t> bytes_;
};

class BinReader {
 public:
  explicit BinReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void expect_magic(const char m[4]) {
    char got[4];
    raw(got, 4);
    if (std::memcmp(got, m, 4) != 0) throw FlowbenchError("bad magic bytes in binary container");
  }

  std::uint8_t u8() { return scalar<std::uint8_t>(); }
  std::uint32_t u32() { return scalar<std::uint32_t>(); }
  std::uint64_t u64() { return scalar<std::uint64_t>(); }
  double f64() { return scalar<double>(); }

  std::string str() {
    std::uint32_t n = u32();
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }

  template <typename T>
  std::vector<T> array() {
    std::uint64_t n = u64();
    std::vector<T> xs(n);
    for (auto& x : xs) x = scalar<T>();
    return xs;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  template <typename T>
  T scalar() {
    static_assert(std::is_trivially_copyable_v<T>);
    T v;
    raw(&v, sizeof(T));
    return v;
  }

  void raw(void* p, std::size_t n) {
    if (pos_ + n > bytes_.size()) throw FlowbenchError("truncated binary container");
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file_bytes(const std::string& path);

/// FNV-1a fingerprint of a byte block (space cache fingerprints).
std::uint64_t fingerprint(std::span<const std::uint8_t> bytes);

}  // namespace flowbench
