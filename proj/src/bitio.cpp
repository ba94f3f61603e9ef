#include "warpco/bitio.hpp"

#include <bit>

#include "warpco/error.hpp"

namespace warpco {

void BitWriter::bit(int b) {
  if (bit_count_ % 8 == 0) buf_.push_back(0);
  if (b) buf_.back() |= static_cast<std::uint8_t>(0x80u >> (bit_count_ % 8));
  ++bit_count_;
}

void BitWriter::bits(std::uint32_t value, int count) {
  if (count < 0 || count > 32) throw ConfigError("bit count out of range");
  for (int i = count - 1; i >= 0; --i) bit(static_cast<int>((value >> i) & 1u));
}

void BitWriter::ue(std::uint32_t value) {
  std::uint64_t x = static_cast<std::uint64_t>(value) + 1;
  int n = 64 - std::countl_zero(x);
  for (int i = 0; i < n - 1; ++i) bit(0);
  for (int i = n - 1; i >= 0; --i) bit(static_cast<int>((x >> i) & 1u));
}

void BitWriter::se(std::int32_t value) {
  std::int64_t v = value;
  std::uint64_t mapped = v > 0 ? 2 * static_cast<std::uint64_t>(v) - 1
                               : 2 * static_cast<std::uint64_t>(-v);
  ue(static_cast<std::uint32_t>(mapped));
}

void BitWriter::byte_align() {
  while (bit_count_ % 8 != 0) bit(0);
}

void BitWriter::aligned_u8(std::uint8_t v) {
  if (!aligned()) throw StateError("aligned write on unaligned stream");
  buf_.push_back(v);
  bit_count_ += 8;
}

void BitWriter::aligned_u16(std::uint16_t v) {
  aligned_u8(static_cast<std::uint8_t>(v & 0xff));
  aligned_u8(static_cast<std::uint8_t>(v >> 8));
}

void BitWriter::aligned_u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    aligned_u8(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void BitWriter::aligned_f32(float v) {
  aligned_u32(std::bit_cast<std::uint32_t>(v));
}

void BitWriter::magic(const char tag[5]) {
  for (int i = 0; i < 4; ++i)
    aligned_u8(static_cast<std::uint8_t>(tag[i]));
}

const std::vector<std::uint8_t>& BitWriter::bytes() const {
  if (!aligned()) throw StateError("stream not byte-aligned");
  return buf_;
}

int BitWriter::ue_bits(std::uint32_t value) {
  std::uint64_t x = static_cast<std::uint64_t>(value) + 1;
  int n = 64 - std::countl_zero(x);
  return 2 * n - 1;
}

int BitWriter::se_bits(std::int32_t value) {
  std::int64_t v = value;
  std::uint64_t mapped = v > 0 ? 2 * static_cast<std::uint64_t>(v) - 1
                               : 2 * static_cast<std::uint64_t>(-v);
  return ue_bits(static_cast<std::uint32_t>(mapped));
}

int BitReader::bit() {
  if (bit_pos_ >= bit_size())
    throw BitstreamError("read past end of stream", bit_pos_);
  std::uint8_t byte = data_[bit_pos_ / 8];
  int b = (byte >> (7 - bit_pos_ % 8)) & 1;
  ++bit_pos_;
  return b;
}

std::uint32_t BitReader::bits(int count) {
  if (count < 0 || count > 32) throw ConfigError("bit count out of range");
  std::uint32_t v = 0;
  for (int i = 0; i < count; ++i) v = (v << 1) | static_cast<std::uint32_t>(bit());
  return v;
}

std::uint32_t BitReader::ue() {
  std::uint64_t start = bit_pos_;
  int zeros = 0;
  while (bit() == 0) {
    ++zeros;
    if (zeros > 32)
      throw BitstreamError("malformed exp-golomb prefix", start);
  }
  std::uint64_t x = 1;
  for (int i = 0; i < zeros; ++i)
    x = (x << 1) | static_cast<std::uint64_t>(bit());
  if (x - 1 > 0xffffffffull)
    throw BitstreamError("exp-golomb value out of range", start);
  return static_cast<std::uint32_t>(x - 1);
}

std::int32_t BitReader::se() {
  std::uint64_t start = bit_pos_;
  std::uint32_t u = ue();
  std::int64_t v = (u % 2 == 1) ? static_cast<std::int64_t>(u / 2 + 1)
                                : -static_cast<std::int64_t>(u / 2);
  if (v < INT32_MIN || v > INT32_MAX)
    throw BitstreamError("signed exp-golomb value out of range", start);
  return static_cast<std::int32_t>(v);
}

void BitReader::byte_align() {
  while (bit_pos_ % 8 != 0) {
    std::uint64_t at = bit_pos_;
    if (bit() != 0) throw BitstreamError("nonzero alignment padding", at);
  }
}

std::uint8_t BitReader::aligned_u8() {
  if (bit_pos_ % 8 != 0)
    throw StateError("aligned read on unaligned stream");
  if (bit_pos_ / 8 >= size_)
    throw BitstreamError("read past end of stream", bit_pos_);
  std::uint8_t v = data_[bit_pos_ / 8];
  bit_pos_ += 8;
  return v;
}

std::uint16_t BitReader::aligned_u16() {
  std::uint16_t lo = aligned_u8(), hi = aligned_u8();
  return static_cast<std::uint16_t>(lo | (hi << 8));
}

std::uint32_t BitReader::aligned_u32() {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(aligned_u8()) << (8 * i);
  return v;
}

float BitReader::aligned_f32() {
  return std::bit_cast<float>(aligned_u32());
}

void BitReader::expect_magic(const char tag[5]) {
  std::uint64_t at = bit_pos_;
  for (int i = 0; i < 4; ++i)
    if (aligned_u8() != static_cast<std::uint8_t>(tag[i]))
      throw BitstreamError(std::string("bad magic, expected ") + tag, at);
}

}  // namespace warpco
