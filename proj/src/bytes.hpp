#pragma once

// Little-endian encode/decode for the on-disk formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "olar/error.hpp"

namespace olar::bytes {

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint64_t bits;
  if constexpr (std::is_same_v<T, double>) {
    bits = std::bit_cast<std::uint64_t>(v);
  } else {
    bits = static_cast<std::uint64_t>(v);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

inline std::uint64_t load_le(const std::uint8_t* p, std::size_t n) {
  std::uint64_t v = 0;
  for (std::size_t i = n; i-- > 0;) v = (v << 8) | p[i];
  return v;
}

inline double load_f64(const std::uint8_t* p) { return std::bit_cast<double>(load_le(p, 8)); }

/// Bounds-checked sequential reader over a byte span.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  template <class T>
  T get() {
    need(sizeof(T));
    const std::uint8_t* p = data_.data() + pos_;
    pos_ += sizeof(T);
    if constexpr (std::is_same_v<T, double>) {
      return load_f64(p);
    } else {
      return static_cast<T>(load_le(p, sizeof(T)));
    }
  }

  void expect_magic(const char (&magic)[5]) {
    need(4);
    if (std::memcmp(data_.data() + pos_, magic, 4) != 0) throw DataError(ErrorCode::BadHeader, "bad magic", -1, 0);
    pos_ += 4;
  }

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size())
      throw DataError(ErrorCode::UnexpectedEof, "blob truncated", -1, static_cast<std::int64_t>(data_.size()));
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace olar::bytes
