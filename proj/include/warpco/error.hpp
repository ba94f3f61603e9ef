#ifndef WARPCO_ERROR_HPP_
#define WARPCO_ERROR_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace warpco {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration value (bad size, QP out of range, variance <= 0, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Mismatched tensor/frame/block dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid input data (empty dataset, mixed lengths, bad curve).
class InputError : public Error {
 public:
  using Error::Error;
};

// Missing or inconsistent coder state (e.g. P frame without a reference).
class StateError : public Error {
 public:
  using Error::Error;
};

// Work refused because it exceeds a configured safety cap.
class ResourceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Training diverged; carries the iteration at which the loss went non-finite.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& msg, long iteration)
      : Error(msg + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

// Malformed file; carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& msg, std::uint64_t byte_offset)
      : Error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}
  std::uint64_t byte_offset() const { return byte_offset_; }

 private:
  std::uint64_t byte_offset_;
};

// Malformed bitstream; carries the bit offset and, once known, the frame index.
class BitstreamError : public Error {
 public:
  BitstreamError(const std::string& msg, std::uint64_t bit_offset,
                 int frame_index = -1)
      : Error(msg + " (bit offset " + std::to_string(bit_offset) +
              (frame_index >= 0 ? ", frame " + std::to_string(frame_index) : "") +
              ")"),
        raw_message_(msg),
        bit_offset_(bit_offset),
        frame_index_(frame_index) {}
  const std::string& raw_message() const { return raw_message_; }
  std::uint64_t bit_offset() const { return bit_offset_; }
  int frame_index() const { return frame_index_; }

 private:
  std::string raw_message_;
  std::uint64_t bit_offset_;
  int frame_index_;
};

}  // namespace warpco

#endif  // WARPCO_ERROR_HPP_
