// Copyright 2026-present the lider authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Little-endian binary encoding for index files.
//
// File layout: magic "LIDR", u32 format version, then a sequence of
// sections. Each section is a 4-byte ASCII tag, a u64 payload length, the
// payload, and the CRC-32C of the payload. Readers stop after the sections
// they know and ignore anything that follows.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <boost/crc.hpp>

#include "lider/common.hpp"

namespace lider {

inline constexpr char kIndexMagic[4] = {'L', 'I', 'D', 'R'};
inline constexpr std::uint32_t kIndexFormatVersion = 1;

template <typename T>
T byte_swap(T v) {
  if constexpr (sizeof(T) == 8) {
    return __builtin_bswap64(v);
  } else if constexpr (sizeof(T) == 4) {
    return __builtin_bswap32(v);
  } else if constexpr (sizeof(T) == 2) {
    return __builtin_bswap16(v);
  } else {
    return v;
  }
}

inline std::uint32_t crc32c(std::string_view bytes) {
  boost::crc_optimal<32, 0x1EDC6F41, 0xFFFFFFFF, 0xFFFFFFFF, true, true> crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::string_view b) { out_.append(b); }

  template <typename T>
  void array(const std::vector<T> &values) {
    for (const T &v : values) put(v);
  }

  void f32_array(const std::vector<float> &values) {
    for (float v : values) f32(v);
  }

  /// Appends a framed section: tag, length, payload, CRC-32C.
  void section(const char (&tag)[5], const ByteWriter &payload) {
    out_.append(tag, 4);
    u64(payload.out_.size());
    out_.append(payload.out_);
    u32(crc32c(payload.out_));
  }

  const std::string &str() const { return out_; }
  std::string take() { return std::move(out_); }

 private:
  template <typename T>
  void put(T v) {
    static_assert(std::is_integral_v<T> && std::is_unsigned_v<T>);
    if constexpr (std::endian::native == std::endian::big) v = byte_swap(v);
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }

  std::string out_;
};

/// Bounds-checked reader; every failure names the section being decoded.
class ByteReader {
 public:
  ByteReader(std::string_view data, std::string section)
      : data_(data), section_(std::move(section)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  float f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }

  template <typename T>
  std::vector<T> array(std::size_t n) {
    require(n, sizeof(T));
    std::vector<T> out(n);
    for (auto &v : out) v = get<T>();
    return out;
  }

  std::vector<float> f32_array(std::size_t n) {
    require(n, 4);
    std::vector<float> out(n);
    for (auto &v : out) v = f32();
    return out;
  }

  std::string_view take(std::size_t n) {
    if (data_.size() - pos_ < n) fail("truncated");
    std::string_view s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  /// Reads a framed section, verifies its tag and checksum, and returns a
  /// reader over its payload.
  ByteReader section(const char (&tag)[5], const std::string &name) {
    if (data_.size() - pos_ < 12) {
      throw LoadError("index file: truncated before section '" + name + "'");
    }
    std::string_view got = data_.substr(pos_, 4);
    if (got != std::string_view(tag, 4)) {
      throw LoadError("index file: expected section '" + name + "' (tag " + std::string(tag, 4) +
                      "), found tag '" + std::string(got) + "'");
    }
    pos_ += 4;
    const std::uint64_t len = u64();
    if (data_.size() - pos_ < len || data_.size() - pos_ - len < 4) {
      throw LoadError("index file: section '" + name + "' is truncated");
    }
    std::string_view payload = data_.substr(pos_, len);
    pos_ += len;
    const std::uint32_t stored = u32();
    if (stored != crc32c(payload)) {
      throw LoadError("index file: checksum mismatch in section '" + name + "'");
    }
    return ByteReader(payload, name);
  }

  bool at_end() const { return pos_ == data_.size(); }
  void expect_end() const {
    if (!at_end()) fail("unexpected trailing bytes");
  }
  [[noreturn]] void fail(const std::string &what) const {
    throw LoadError("index file: section '" + section_ + "': " + what);
  }

 private:
  void require(std::size_t n, std::size_t width) {
    if (n > (data_.size() - pos_) / width) fail("truncated");
  }

  template <typename T>
  T get() {
    std::string_view s = take(sizeof(T));
    T v;
    std::memcpy(&v, s.data(), sizeof(T));
    if constexpr (std::endian::native == std::endian::big) v = byte_swap(v);
    return v;
  }

  std::string_view data_;
  std::size_t pos_ = 0;
  std::string section_;
};

inline void write_file(const std::string &path, const std::string &bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write to '" + path + "' failed");
}

/// Writes the file preamble: magic and format version.
inline void write_preamble(ByteWriter &w) {
  w.bytes(std::string_view(kIndexMagic, 4));
  w.u32(kIndexFormatVersion);
}

inline void read_preamble(ByteReader &r) {
  std::string_view magic;
  try {
    magic = r.take(4);
  } catch (const LoadError &) {
    throw LoadError("index file: truncated header");
  }
  if (magic != std::string_view(kIndexMagic, 4)) throw LoadError("index file: bad magic");
  std::uint32_t version = 0;
  try {
    version = r.u32();
  } catch (const LoadError &) {
    throw LoadError("index file: truncated header");
  }
  if (version > kIndexFormatVersion) {
    throw LoadError("index file: unsupported format version " + std::to_string(version) +
                    " (this build reads up to " + std::to_string(kIndexFormatVersion) + ")");
  }
  if (version == 0) throw LoadError("index file: invalid format version 0");
}

}  // namespace lider
