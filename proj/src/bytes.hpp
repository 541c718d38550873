#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "protoseg/errors.hpp"

// Little-endian buffer primitives shared by the cloud and checkpoint
// codecs. Byte order is composed explicitly so files are identical on any
// host.
namespace protoseg::bytes {

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> buf) : buf_(buf) {}

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == buf_.size(); }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(what + " at byte " + std::to_string(pos_));
  }

  void raw(void* dst, std::size_t n, const char* what) {
    if (buf_.size() - pos_ < n)
      throw FormatError(std::string(what) + ": file truncated at byte " + std::to_string(pos_) +
                        " (need " + std::to_string(n) + " more bytes, have " +
                        std::to_string(buf_.size() - pos_) + ")");
    std::memcpy(dst, buf_.data() + pos_, n);
    pos_ += n;
  }

  std::uint8_t u8(const char* what) {
    std::uint8_t v;
    raw(&v, 1, what);
    return v;
  }

  std::uint16_t u16(const char* what) {
    unsigned char b[2];
    raw(b, 2, what);
    return static_cast<std::uint16_t>(b[0] | (std::uint16_t(b[1]) << 8));
  }

  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    raw(b, 4, what);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
  }

  std::uint64_t u64(const char* what) {
    unsigned char b[8];
    raw(b, 8, what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }

  std::int32_t i32(const char* what) { return std::bit_cast<std::int32_t>(u32(what)); }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

 private:
  std::span<const unsigned char> buf_;
  std::size_t pos_ = 0;
};

class Writer {
 public:
  std::vector<unsigned char>& buffer() { return buf_; }

  void raw(const void* src, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(src);
    buf_.insert(buf_.end(), p, p + n);
  }

  void u8(std::uint8_t v) { buf_.push_back(v); }

  void u16(std::uint16_t v) {
    buf_.push_back(static_cast<unsigned char>(v & 0xff));
    buf_.push_back(static_cast<unsigned char>(v >> 8));
  }

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
  }

  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
  }

  void i32(std::int32_t v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

 private:
  std::vector<unsigned char> buf_;
};

std::vector<unsigned char> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const unsigned char> data);

}  // namespace protoseg::bytes
