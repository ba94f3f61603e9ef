#ifndef WARPCO_BINIO_HPP_
#define WARPCO_BINIO_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace warpco {

// Little-endian byte writer for the container formats (WRP1/FTN1/IMP1).
class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void magic(const char tag[5]);
  // u32 element count followed by the raw values.
  void f32_array(const std::vector<float>& values);

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  void to_file(const std::string& path) const;

 private:
  std::vector<std::uint8_t> bytes_;
};

// Matching reader; every failure is a FormatError carrying the byte offset.
class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> bytes)
      : bytes_(std::move(bytes)) {}
  static ByteReader from_file(const std::string& path);

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  void expect_magic(const char tag[5]);
  std::vector<float> f32_array(std::uint32_t max_count);

  std::uint64_t offset() const { return pos_; }
  void expect_end() const;

 private:
  const std::uint8_t* need(std::size_t n);
  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path,
                      const std::vector<std::uint8_t>& bytes);

}  // namespace warpco

#endif  // WARPCO_BINIO_HPP_
