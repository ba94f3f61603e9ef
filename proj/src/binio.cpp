#include "warpco/binio.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "warpco/error.hpp"

namespace warpco {

void ByteWriter::u16(std::uint16_t v) {
  bytes_.push_back(static_cast<std::uint8_t>(v & 0xff));
  bytes_.push_back(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    bytes_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    bytes_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::magic(const char tag[5]) {
  for (int i = 0; i < 4; ++i)
    bytes_.push_back(static_cast<std::uint8_t>(tag[i]));
}

void ByteWriter::f32_array(const std::vector<float>& values) {
  u32(static_cast<std::uint32_t>(values.size()));
  for (float v : values) f32(v);
}

void ByteWriter::to_file(const std::string& path) const {
  write_file_bytes(path, bytes_);
}

ByteReader ByteReader::from_file(const std::string& path) {
  return ByteReader(read_file_bytes(path));
}

const std::uint8_t* ByteReader::need(std::size_t n) {
  if (pos_ + n > bytes_.size())
    throw FormatError("truncated file", pos_);
  const std::uint8_t* p = bytes_.data() + pos_;
  pos_ += n;
  return p;
}

std::uint8_t ByteReader::u8() { return *need(1); }

std::uint16_t ByteReader::u16() {
  const std::uint8_t* p = need(2);
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t ByteReader::u32() {
  const std::uint8_t* p = need(4);
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t ByteReader::u64() {
  std::uint64_t lo = u32();
  std::uint64_t hi = u32();
  return lo | (hi << 32);
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

void ByteReader::expect_magic(const char tag[5]) {
  std::uint64_t at = pos_;
  const std::uint8_t* p = need(4);
  if (std::memcmp(p, tag, 4) != 0)
    throw FormatError(std::string("bad magic, expected \"") + tag + "\"", at);
}

std::vector<float> ByteReader::f32_array(std::uint32_t max_count) {
  std::uint64_t at = pos_;
  std::uint32_t count = u32();
  if (count > max_count)
    throw FormatError("array length " + std::to_string(count) +
                          " exceeds limit " + std::to_string(max_count),
                      at);
  std::vector<float> out(count);
  for (std::uint32_t i = 0; i < count; ++i) out[i] = f32();
  return out;
}

void ByteReader::expect_end() const {
  if (pos_ != bytes_.size())
    throw FormatError("trailing bytes after end of payload", pos_);
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path);
  return bytes;
}

void write_file_bytes(const std::string& path,
                      const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace warpco
