#include "warpco/tensor.hpp"

#include <cmath>

#include "warpco/binio.hpp"
#include "warpco/error.hpp"

namespace warpco {

FeatureTensor::FeatureTensor(int c, int h, int w)
    : channels(c), height(h), width(w) {
  if (c < 1 || h < 1 || w < 1)
    throw ShapeError("feature tensor dimensions must be positive");
  data.assign(static_cast<std::size_t>(c) * h * w, 0.0);
}

TilingLayout TilingLayout::square_grid(int reduced_channels, int tile_h,
                                       int tile_w) {
  if (reduced_channels < 1)
    throw ShapeError("layout needs at least one channel");
  int cols = 1;
  while (cols * cols < reduced_channels) ++cols;
  int rows = (reduced_channels + cols - 1) / cols;
  TilingLayout layout{rows, cols, reduced_channels, tile_h, tile_w};
  layout.validate();
  return layout;
}

void TilingLayout::validate() const {
  if (rows < 1 || cols < 1 || tile_height < 1 || tile_width < 1 ||
      reduced_channels < 1)
    throw ShapeError("tiling layout fields must be positive");
  if (rows * cols < reduced_channels)
    throw ShapeError("tile grid " + std::to_string(rows) + "x" +
                     std::to_string(cols) + " cannot hold " +
                     std::to_string(reduced_channels) + " channels");
}

PackedFrame::PackedFrame(const TilingLayout& lay)
    : height(lay.frame_height()), width(lay.frame_width()), layout(lay) {
  layout.validate();
  data.assign(static_cast<std::size_t>(height) * width, 0.0);
}

PackedFrame pack_tiles(const FeatureTensor& z, const TilingLayout& layout) {
  layout.validate();
  if (z.channels != layout.reduced_channels || z.height != layout.tile_height ||
      z.width != layout.tile_width)
    throw ShapeError("feature tensor does not match tiling layout");
  PackedFrame frame(layout);
  for (int c = 0; c < z.channels; ++c) {
    int ty = (c / layout.cols) * layout.tile_height;
    int tx = (c % layout.cols) * layout.tile_width;
    for (int y = 0; y < z.height; ++y)
      for (int x = 0; x < z.width; ++x)
        frame.at(ty + y, tx + x) = z.at(c, y, x);
  }
  return frame;
}

FeatureTensor unpack_tiles(const PackedFrame& frame) {
  const TilingLayout& layout = frame.layout;
  layout.validate();
  if (frame.height != layout.frame_height() ||
      frame.width != layout.frame_width())
    throw ShapeError("packed frame does not match its layout");
  FeatureTensor z(layout.reduced_channels, layout.tile_height,
                  layout.tile_width);
  for (int c = 0; c < z.channels; ++c) {
    int ty = (c / layout.cols) * layout.tile_height;
    int tx = (c % layout.cols) * layout.tile_width;
    for (int y = 0; y < z.height; ++y)
      for (int x = 0; x < z.width; ++x)
        z.at(c, y, x) = frame.at(ty + y, tx + x);
  }
  return z;
}

void save_features(const std::vector<FeatureTensor>& frames,
                   const std::string& path) {
  if (frames.empty()) throw InputError("cannot save an empty feature sequence");
  const FeatureTensor& first = frames.front();
  for (const FeatureTensor& f : frames)
    if (!f.same_shape(first))
      throw ShapeError("feature sequence has mixed shapes");
  ByteWriter w;
  w.magic("FTN1");
  w.u32(static_cast<std::uint32_t>(first.channels));
  w.u32(static_cast<std::uint32_t>(first.height));
  w.u32(static_cast<std::uint32_t>(first.width));
  w.u32(static_cast<std::uint32_t>(frames.size()));
  for (const FeatureTensor& f : frames)
    for (double v : f.data) w.f32(static_cast<float>(v));
  w.to_file(path);
}

std::vector<FeatureTensor> load_features(const std::string& path) {
  ByteReader r = ByteReader::from_file(path);
  r.expect_magic("FTN1");
  std::uint64_t dims_at = r.offset();
  std::uint32_t c = r.u32(), h = r.u32(), wdt = r.u32(), count = r.u32();
  if (c == 0 || h == 0 || wdt == 0 || c > 4096 || h > 8192 || wdt > 8192)
    throw FormatError("implausible tensor dimensions", dims_at);
  if (count == 0 || count > 65536)
    throw FormatError("implausible frame count", dims_at + 12);
  std::vector<FeatureTensor> frames;
  frames.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    FeatureTensor f(static_cast<int>(c), static_cast<int>(h),
                    static_cast<int>(wdt));
    for (double& v : f.data) {
      float s = r.f32();
      if (!std::isfinite(s))
        throw FormatError("non-finite sample", r.offset() - 4);
      v = s;
    }
    frames.push_back(std::move(f));
  }
  r.expect_end();
  return frames;
}

}  // namespace warpco
