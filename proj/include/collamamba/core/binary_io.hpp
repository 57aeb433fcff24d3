#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "collamamba/core/error.hpp"
#include "collamamba/core/tensor.hpp"

namespace collamamba::io {

/// Little-endian primitive writer over an ostream.
class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  void bytes(const void* p, std::size_t n) { os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void magic(std::string_view m) { bytes(m.data(), m.size()); }

  template <typename U>
  void scalar(U v) {
    static_assert(std::is_arithmetic_v<U>);
    auto raw = std::bit_cast<std::array<unsigned char, sizeof(U)>>(v);
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    bytes(raw.data(), raw.size());
  }

  void u8(std::uint8_t v) { scalar(v); }
  void u32(std::uint32_t v) { scalar(v); }
  void u64(std::uint64_t v) { scalar(v); }

  void string(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

  /// rank, extents, element width (4 or 8), then the values.
  template <typename T>
  void tensor(const Tensor<T>& t) {
    u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) u64(d);
    u8(static_cast<std::uint8_t>(sizeof(T)));
    if constexpr (std::endian::native == std::endian::little) {
      bytes(t.data(), t.size() * sizeof(T));
    } else {
      for (T v : t.values()) scalar(v);
    }
  }

  bool ok() const { return static_cast<bool>(os_); }

 private:
  std::ostream& os_;
};

/// Reader counterpart; every short read or inconsistency is a FormatError.
class Reader {
 public:
  Reader(std::istream& is, std::string what) : is_(is), what_(std::move(what)) {}

  void bytes(void* p, std::size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) fail("truncated");
  }

  void expect_magic(std::string_view m) {
    std::string got(m.size(), '\0');
    is_.read(got.data(), static_cast<std::streamsize>(got.size()));
    if (static_cast<std::size_t>(is_.gcount()) != m.size() || got != m)
      fail("bad magic bytes (expected \"" + std::string(m) + "\")");
  }

  template <typename U>
  U scalar() {
    std::array<unsigned char, sizeof(U)> raw;
    bytes(raw.data(), raw.size());
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    return std::bit_cast<U>(raw);
  }

  std::uint8_t u8() { return scalar<std::uint8_t>(); }
  std::uint32_t u32() { return scalar<std::uint32_t>(); }
  std::uint64_t u64() { return scalar<std::uint64_t>(); }

  std::string string(std::size_t limit = std::size_t{1} << 28) {
    const std::uint32_t n = u32();
    if (n > limit) fail("string length out of range");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

  /// Reads a tensor written by Writer::tensor, converting the element width
  /// to T if needed.
  template <typename T>
  Tensor<T> tensor() {
    const std::uint32_t rank = u32();
    if (rank == 0 || rank > 8) fail("tensor rank out of range");
    Shape shape(rank);
    std::uint64_t count = 1;
    for (auto& d : shape) {
      const std::uint64_t v = u64();
      if (v == 0 || v > (std::uint64_t{1} << 40) || count > (std::uint64_t{1} << 40) / v) fail("tensor extent out of range");
      d = static_cast<std::size_t>(v);
      count *= v;
    }
    const std::uint8_t width = u8();
    std::vector<T> data(static_cast<std::size_t>(count));
    if (width == sizeof(T)) {
      for (auto& v : data) v = scalar<T>();
    } else if (width == 4) {
      for (auto& v : data) v = static_cast<T>(scalar<float>());
    } else if (width == 8) {
      for (auto& v : data) v = static_cast<T>(scalar<double>());
    } else {
      fail("unknown element width " + std::to_string(width));
    }
    return Tensor<T>(std::move(shape), std::move(data));
  }

  [[noreturn]] void fail(const std::string& msg) const { throw FormatError(what_ + ": " + msg); }

 private:
  std::istream& is_;
  std::string what_;
};

}  // namespace collamamba::io
