#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>

#include "capembed/errors.hpp"

// Little-endian byte packing and whole-file helpers shared by the binary
// file formats (feature vectors, checkpoints).

namespace capembed::bytes {

inline void put_u16(std::string& buf, std::uint16_t v) {
  buf += static_cast<char>(v & 0xff);
  buf += static_cast<char>((v >> 8) & 0xff);
}

inline void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf += static_cast<char>((v >> (8 * i)) & 0xff);
}

inline void put_f32(std::string& buf, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(buf, bits);
}

class Reader {
 public:
  Reader(std::string data, std::string name) : data_(std::move(data)), name_(std::move(name)) {}

  std::uint16_t u16() { return static_cast<std::uint16_t>(byte() | (byte() << 8)); }

  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte()) << (8 * i);
    return v;
  }

  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  std::string raw(std::size_t n) {
    need(n);
    std::string out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ == data_.size(); }

  void expect_end() const {
    if (!at_end()) throw FormatError(name_ + ": trailing bytes after payload");
  }

 private:
  std::uint32_t byte() {
    need(1);
    return static_cast<unsigned char>(data_[pos_++]);
  }
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw FormatError(name_ + ": truncated file");
  }

  std::string data_;
  std::string name_;
  std::size_t pos_ = 0;
};

// Reads a whole file; FormatError if it cannot be opened.
std::string slurp(const std::filesystem::path& path);

// Writes a whole file; std::runtime_error on I/O failure.
void spew(const std::filesystem::path& path, const std::string& data);

}  // namespace capembed::bytes
