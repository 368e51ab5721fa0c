#pragma once

#include "waypixel/error.hpp"

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

namespace waypixel {

/// Little-endian writer for the base64 binary sections.
class ByteWriter {
 public:
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  void put(std::uint32_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return get(4); }
  float f32() { return std::bit_cast<float>(get(4)); }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::uint32_t get(int n) {
    if (pos_ + static_cast<std::size_t>(n) > data_.size()) {
      throw Error(ErrorCode::MalformedFile, "truncated binary section");
    }
    std::uint32_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace waypixel
