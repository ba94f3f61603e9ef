#ifndef WARPCO_BITIO_HPP_
#define WARPCO_BITIO_HPP_

#include <cstdint>
#include <vector>

namespace warpco {

// Bit-level writer, most-significant bit first within a byte. Aligned
// helpers write little-endian multi-byte values and require byte alignment.
class BitWriter {
 public:
  void bit(int b);
  void bits(std::uint32_t value, int count);  // msb of the field first
  void ue(std::uint32_t value);
  void se(std::int32_t value);
  void byte_align();  // zero padding
  void aligned_u8(std::uint8_t v);
  void aligned_u16(std::uint16_t v);
  void aligned_u32(std::uint32_t v);
  void aligned_f32(float v);
  void magic(const char tag[5]);

  std::uint64_t bit_position() const { return bit_count_; }
  bool aligned() const { return bit_count_ % 8 == 0; }
  const std::vector<std::uint8_t>& bytes() const;

  static int ue_bits(std::uint32_t value);
  static int se_bits(std::int32_t value);

 private:
  std::vector<std::uint8_t> buf_;
  std::uint64_t bit_count_ = 0;
};

// Matching reader; every failure throws BitstreamError carrying the bit
// offset where the problem was noticed.
class BitReader {
 public:
  explicit BitReader(const std::vector<std::uint8_t>& bytes)
      : data_(bytes.data()), size_(bytes.size()) {}
  BitReader(const std::uint8_t* data, std::size_t size)
      : data_(data), size_(size) {}

  int bit();
  std::uint32_t bits(int count);
  std::uint32_t ue();
  std::int32_t se();
  void byte_align();  // padding must be zero bits
  std::uint8_t aligned_u8();
  std::uint16_t aligned_u16();
  std::uint32_t aligned_u32();
  float aligned_f32();
  void expect_magic(const char tag[5]);

  std::uint64_t bit_position() const { return bit_pos_; }
  std::uint64_t bit_size() const { return static_cast<std::uint64_t>(size_) * 8; }
  bool at_end() const { return bit_pos_ == bit_size(); }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::uint64_t bit_pos_ = 0;
};

}  // namespace warpco

#endif  // WARPCO_BITIO_HPP_
