#include "warpco/importance.hpp"

#include <cmath>

#include "warpco/binio.hpp"
#include "warpco/error.hpp"
#include "warpco/rng.hpp"

namespace warpco {

void ImportanceMap::validate() const {
  if (weights.empty()) throw ShapeError("importance map is empty");
  if (n_s < 0) throw ShapeError("negative sketch dimension");
  for (float w : weights)
    if (!std::isfinite(w) || w < 0.0f)
      throw InputError("importance weights must be finite and non-negative");
}

namespace {

// Accumulate per-feature-sample squares into packed-frame positions,
// leaving padding tiles at exactly 0.
void add_squares(const FeatureTensor& u, std::vector<double>& acc,
                 const TilingLayout& layout) {
  const int w_frame = layout.frame_width();
  for (int c = 0; c < u.channels; ++c) {
    int ty = (c / layout.cols) * layout.tile_height;
    int tx = (c % layout.cols) * layout.tile_width;
    for (int y = 0; y < u.height; ++y)
      for (int x = 0; x < u.width; ++x) {
        double v = u.at(c, y, x);
        acc[static_cast<std::size_t>(ty + y) * w_frame + (tx + x)] += v * v;
      }
  }
}

ImportanceMap finish_map(const std::vector<double>& acc, int n_s,
                         std::uint64_t seed, MapSource source,
                         int frame_index) {
  ImportanceMap map;
  map.weights.resize(acc.size());
  for (std::size_t j = 0; j < acc.size(); ++j)
    map.weights[j] = static_cast<float>(acc[j]);
  map.n_s = n_s;
  map.sketch_seed = seed;
  map.source = source;
  map.frame_index = frame_index;
  map.validate();
  return map;
}

}  // namespace

ImportanceMap compute_map(const WrapperParams& g2, const PackedFrame& z,
                          const SketchSpec& spec, int frame_index) {
  if (spec.n_s < 1) throw ConfigError("sketch dimension must be >= 1");
  const TilingLayout& layout = z.layout;
  FeatureTensor zf = unpack_tiles(z);
  if (zf.channels != g2.c_red)
    throw ShapeError("packed frame layout does not match wrapper");
  RestoreLinearization lin = restore_linearize(g2, zf);

  const std::size_t n_f =
      static_cast<std::size_t>(g2.c_in) * zf.height * zf.width;
  std::vector<double> acc(z.data.size(), 0.0);
  FeatureTensor v(g2.c_in, zf.height, zf.width);
  for (int k = 0; k < spec.n_s; ++k) {
    RngStream row{spec.seed, static_cast<std::uint64_t>(k), 0};
    v.data = gaussian_sequence(row, n_f, 1.0 / spec.n_s);
    FeatureTensor u = restore_vjp(g2, lin, v);
    add_squares(u, acc, layout);
  }
  return finish_map(acc, spec.n_s, spec.seed, MapSource::PerFrame,
                    frame_index);
}

ImportanceMap exact_map(const WrapperParams& g2, const PackedFrame& z,
                        std::size_t safety_cap) {
  const TilingLayout& layout = z.layout;
  FeatureTensor zf = unpack_tiles(z);
  if (zf.channels != g2.c_red)
    throw ShapeError("packed frame layout does not match wrapper");
  const std::size_t n_f =
      static_cast<std::size_t>(g2.c_in) * zf.height * zf.width;
  if (n_f > safety_cap)
    throw ResourceError("exact map needs " + std::to_string(n_f) +
                        " vjp passes, above the cap of " +
                        std::to_string(safety_cap));
  RestoreLinearization lin = restore_linearize(g2, zf);
  std::vector<double> acc(z.data.size(), 0.0);
  FeatureTensor basis(g2.c_in, zf.height, zf.width);
  for (std::size_t i = 0; i < n_f; ++i) {
    basis.data[i] = 1.0;
    FeatureTensor u = restore_vjp(g2, lin, basis);
    add_squares(u, acc, layout);
    basis.data[i] = 0.0;
  }
  return finish_map(acc, 0, 0, MapSource::PerFrame, 0);
}

MetricParams derive_metric_params(const ImportanceMap& map, double alpha,
                                  double lambda_sse, NormalizationRule rule,
                                  std::size_t n_p) {
  if (alpha < 0.0 || lambda_sse < 0.0)
    throw ConfigError("alpha and lambda_sse must be non-negative");
  map.validate();
  if (map.weights.size() != n_p)
    throw ShapeError("map length does not match n_p");
  double sum = 0.0, sum_sq = 0.0;
  for (float w : map.weights) {
    sum += w;
    sum_sq += static_cast<double>(w) * w;
  }
  MetricParams mp;
  mp.alpha = alpha;
  mp.lambda_sse = lambda_sse;
  mp.rule = rule;
  double scale;  // the per-sample importance level entering the lambda rule
  if (rule == NormalizationRule::PaperL2) {
    mp.tau_tilde = std::sqrt(sum_sq);
    scale = mp.tau_tilde / static_cast<double>(n_p);
  } else {
    mp.tau_tilde = sum / static_cast<double>(n_p);
    scale = mp.tau_tilde;
  }
  mp.tau = alpha * mp.tau_tilde;
  mp.lambda = (scale + mp.tau) * lambda_sse;
  if (mp.tau_tilde == 0.0) {
    mp.sse_fallback = true;
    mp.lambda = lambda_sse;
  }
  return mp;
}

std::vector<std::shared_ptr<const ImportanceMap>> assign_maps_iwa(
    const GopStructure& gop, const std::vector<PackedFrame>& frames,
    const WrapperParams& g2, const SketchSpec& spec) {
  if (frames.empty()) throw InputError("cannot assign maps to no frames");
  if (gop.length < 1) throw ConfigError("gop length must be >= 1");
  std::vector<std::shared_ptr<const ImportanceMap>> assigned;
  assigned.reserve(frames.size());
  std::shared_ptr<const ImportanceMap> current;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (i % static_cast<std::size_t>(gop.length) == 0) {
      ImportanceMap m = compute_map(g2, frames[i], spec,
                                    static_cast<int>(i));
      m.source = MapSource::IFrameReuse;
      current = std::make_shared<const ImportanceMap>(std::move(m));
    }
    assigned.push_back(current);
  }
  return assigned;
}

ImportanceMap average_maps(const std::vector<ImportanceMap>& maps) {
  if (maps.empty()) throw InputError("cannot average zero maps");
  const std::size_t n = maps.front().weights.size();
  for (const ImportanceMap& m : maps) {
    m.validate();
    if (m.weights.size() != n)
      throw InputError("maps to average have mixed lengths");
  }
  std::vector<double> acc(n, 0.0);
  for (const ImportanceMap& m : maps)
    for (std::size_t j = 0; j < n; ++j) acc[j] += m.weights[j];
  for (double& v : acc) v /= static_cast<double>(maps.size());
  return finish_map(acc, maps.front().n_s, maps.front().sketch_seed,
                    MapSource::Frozen, 0);
}

void save_map(const ImportanceMap& map, const std::string& path) {
  map.validate();
  ByteWriter w;
  w.magic("IMP1");
  w.u32(1);  // version
  w.u32(static_cast<std::uint32_t>(map.weights.size()));
  w.u32(static_cast<std::uint32_t>(map.n_s));
  w.u64(map.sketch_seed);
  w.u8(static_cast<std::uint8_t>(map.source));
  if (map.source != MapSource::Frozen)
    w.u32(static_cast<std::uint32_t>(map.frame_index));
  w.f32_array(map.weights);
  w.to_file(path);
}

ImportanceMap load_map(const std::string& path) {
  ByteReader r = ByteReader::from_file(path);
  r.expect_magic("IMP1");
  std::uint64_t at = r.offset();
  std::uint32_t version = r.u32();
  if (version != 1)
    throw FormatError("unsupported map version " + std::to_string(version),
                      at);
  std::uint32_t n_p = r.u32();
  if (n_p == 0 || n_p > (1u << 26))
    throw FormatError("implausible map length", at + 4);
  ImportanceMap map;
  map.n_s = static_cast<int>(r.u32());
  map.sketch_seed = r.u64();
  std::uint64_t tag_at = r.offset();
  std::uint8_t tag = r.u8();
  if (tag > 2) throw FormatError("unknown map source tag", tag_at);
  map.source = static_cast<MapSource>(tag);
  if (map.source != MapSource::Frozen)
    map.frame_index = static_cast<int>(r.u32());
  map.weights = r.f32_array(n_p);
  if (map.weights.size() != n_p)
    throw FormatError("map weight array has wrong length", tag_at);
  r.expect_end();
  map.validate();
  return map;
}

}  // namespace warpco
