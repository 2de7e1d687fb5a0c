#pragma once

// Little-endian byte buffers shared by the EMB1 and STU1 containers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <type_traits>
#include <vector>

#include "svdkd/errors.hpp"

namespace svdkd::detail {

class ByteWriter {
 public:
  void put_bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buffer_.insert(buffer_.end(), p, p + size);
  }
  template <typename T>
  void put_le(T value) {
    using U = std::make_unsigned_t<T>;
    auto bits = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buffer_.push_back(static_cast<std::uint8_t>(bits & 0xFF));
      bits = static_cast<U>(bits >> 8);
    }
  }
  void put_f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }
  void put_f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }

  const std::vector<std::uint8_t>& bytes() const { return buffer_; }

 private:
  std::vector<std::uint8_t> buffer_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> data) : data_(std::move(data)) {}

  bool exhausted() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

  // Header fields: running out is a malformed header.
  template <typename T>
  T header_le(const char* field) {
    if (remaining() < sizeof(T)) throw FormatError(std::string("header truncated at ") + field);
    return take_le<T>();
  }

  // Payload fields: running out means the declared sizes do not match.
  template <typename T>
  T payload_le(const std::string& what) {
    if (remaining() < sizeof(T)) throw DataError("payload truncated in " + what);
    return take_le<T>();
  }

  std::string payload_string(std::uint64_t length, const std::string& what) {
    if (remaining() < length) throw DataError("payload truncated in " + what);
    std::string out(reinterpret_cast<const char*>(data_.data() + pos_), length);
    pos_ += length;
    return out;
  }

  void header_bytes(void* out, std::size_t size) {
    if (remaining() < size) throw FormatError("header truncated");
    std::memcpy(out, data_.data() + pos_, size);
    pos_ += size;
  }

 private:
  template <typename T>
  T take_le() {
    using U = std::make_unsigned_t<T>;
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bits = static_cast<U>(bits | (static_cast<U>(data_[pos_ + i]) << (8 * i)));
    }
    pos_ += sizeof(T);
    return static_cast<T>(bits);
  }

  std::vector<std::uint8_t> data_;
  std::size_t pos_ = 0;
};


inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw IoError("write to " + path.string() + " failed");
}

}  // namespace svdkd::detail
