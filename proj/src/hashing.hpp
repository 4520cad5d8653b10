#pragma once

#include <bit>
#include <cstdint>
#include <string_view>

namespace mvg::detail {

// 64-bit FNV-1a; used where a hash must be stable across platforms and runs.
class Fnv1a {
 public:
  Fnv1a& bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv1a& u64(std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    return bytes(buf, 8);
  }
  Fnv1a& f32(float v) { return u64(std::bit_cast<std::uint32_t>(v)); }
  Fnv1a& str(std::string_view s) { return u64(s.size()).bytes(s.data(), s.size()); }
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

// Maps a 64-bit draw to [-1, 1) using its top 53 bits.
inline double unit_interval_signed(std::uint64_t draw) {
  return static_cast<double>(draw >> 11) * 0x1.0p-52 - 1.0;
}

// Maps a 64-bit draw to [0, 1).
inline double unit_interval(std::uint64_t draw) { return static_cast<double>(draw >> 11) * 0x1.0p-53; }

}  // namespace mvg::detail
