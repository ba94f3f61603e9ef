#ifndef WARPCO_TENSOR_HPP_
#define WARPCO_TENSOR_HPP_

#include <cstddef>
#include <string>
#include <vector>

namespace warpco {

// Feature stack: channels x height x width, channel-major storage.
struct FeatureTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  FeatureTensor() = default;
  FeatureTensor(int c, int h, int w);

  double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::size_t sample_count() const { return data.size(); }
  bool same_shape(const FeatureTensor& other) const {
    return channels == other.channels && height == other.height &&
           width == other.width;
  }
};

// Tile grid for the packed codec frame. Tiles are assigned to channels in
// raster-scan order; cells past reduced_channels stay as zero padding.
struct TilingLayout {
  int rows = 0;
  int cols = 0;
  int reduced_channels = 0;
  int tile_height = 0;
  int tile_width = 0;

  int frame_height() const { return rows * tile_height; }
  int frame_width() const { return cols * tile_width; }
  bool operator==(const TilingLayout&) const = default;

  // Near-square grid with cols = ceil(sqrt(C')), rows to fit.
  static TilingLayout square_grid(int reduced_channels, int tile_h, int tile_w);
  void validate() const;
};

// Codec-domain frame: the tiled channels as one 2D plane.
struct PackedFrame {
  int height = 0;
  int width = 0;
  std::vector<double> data;
  TilingLayout layout;

  PackedFrame() = default;
  PackedFrame(const TilingLayout& lay);

  double& at(int y, int x) {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  double at(int y, int x) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t sample_count() const { return data.size(); }
};

PackedFrame pack_tiles(const FeatureTensor& z, const TilingLayout& layout);
FeatureTensor unpack_tiles(const PackedFrame& frame);

// FTN1 container: u32 C,H,W, u32 frame count, then frames as contiguous
// little-endian f32, channel-major.
void save_features(const std::vector<FeatureTensor>& frames,
                   const std::string& path);
std::vector<FeatureTensor> load_features(const std::string& path);

}  // namespace warpco

#endif  // WARPCO_TENSOR_HPP_
