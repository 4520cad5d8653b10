#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>

#include "mvg/error.hpp"

namespace mvg::detail {

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view data);

// Little-endian encoder for the binary artifact formats.
class BinaryWriter {
 public:
  void magic(std::string_view m) { buf_.append(m.substr(0, 4)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::string_view s) { buf_.append(s); }
  const std::string& data() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

// Bounds-checked decoder; every failure reports the source name and offset.
class BinaryReader {
 public:
  BinaryReader(std::string data, std::string source) : data_(std::move(data)), source_(std::move(source)) {}

  std::uint64_t offset() const { return pos_; }
  bool at_end() const { return pos_ >= data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }
  const std::string& source() const { return source_; }

  void expect_magic(std::string_view m) {
    need(4, "magic");
    if (std::string_view(data_).substr(pos_, 4) != m) fail("bad magic, expected '" + std::string(m) + "'");
    pos_ += 4;
  }
  std::uint32_t u32(const char* what = "u32") {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(const char* what = "f32") { return std::bit_cast<float>(u32(what)); }
  std::string bytes(std::size_t n, const char* what = "bytes") {
    need(n, what);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  [[noreturn]] void fail(const std::string& message) const {
    throw Error(ErrorCode::FormatError, source_ + ": " + message + " at byte offset " + std::to_string(pos_), source_,
                pos_);
  }
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) fail(std::string("truncated ") + what);
  }

 private:
  std::string data_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace mvg::detail
