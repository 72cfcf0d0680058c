#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace paygo {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::string to_hex(ByteView bytes);
/// Throws Errc::MalformedMessage on odd length or non-hex characters.
Bytes from_hex(std::string_view hex);

std::string base58_encode(ByteView bytes);

namespace codec {

/// Canonical binary framing shared by every wire message: integers are
/// big-endian, variable fields are prefixed with a u32 length.
class Writer {
 public:
  Writer& u8(std::uint8_t v);
  Writer& u32(std::uint32_t v);
  Writer& u64(std::uint64_t v);
  Writer& i64(std::int64_t v);
  Writer& f64(double v);
  Writer& bytes(ByteView v);
  Writer& str(std::string_view v);

  const Bytes& data() const& { return buf_; }
  Bytes take() && { return std::move(buf_); }

 private:
  Bytes buf_;
};

/// Reads what Writer wrote. Any truncation or trailing garbage raises
/// Errc::MalformedMessage.
class Reader {
 public:
  explicit Reader(ByteView data) : data_(data) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64();
  double f64();
  Bytes bytes();
  std::string str();

  bool empty() const { return pos_ == data_.size(); }
  void expect_end() const;

 private:
  ByteView take(std::size_t n);

  ByteView data_;
  std::size_t pos_ = 0;
};

}  // namespace codec

/// Line-oriented text records: tab-separated fields, with '\\', '\t' and
/// '\n' escaped inside a field.
namespace text {

std::string escape(std::string_view field);
std::string unescape(std::string_view field);
std::string join(const std::vector<std::string>& fields);
std::vector<std::string> split(std::string_view line);

}  // namespace text

}  // namespace paygo
