#ifndef WARPCO_IMPORTANCE_HPP_
#define WARPCO_IMPORTANCE_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "warpco/tensor.hpp"
#include "warpco/wrapper.hpp"

namespace warpco {

enum class MapSource : std::uint8_t {
  PerFrame = 0,
  IFrameReuse = 1,
  Frozen = 2,
};

// Per-sample importance h over a packed frame: h_j = sum_k (J_g^T v_k)_j^2
// for n_s sketch rows v_k with N(0, 1/n_s) entries. Stored in f32 so file
// round trips and frozen averages of identical maps stay bit-exact.
struct ImportanceMap {
  std::vector<float> weights;
  int n_s = 0;
  std::uint64_t sketch_seed = 0;
  MapSource source = MapSource::PerFrame;
  int frame_index = 0;

  double w(std::size_t j) const { return weights[j]; }
  void validate() const;
};

struct SketchSpec {
  int n_s = 4;
  std::uint64_t seed = 0;
};

enum class NormalizationRule { PaperL2, MeanL1 };

// tau = alpha * tau_tilde; lambda couples the weighted metric back to the
// SSE Lagrangian. PaperL2 follows the printed rule; MeanL1 normalizes by
// sample count instead.
struct MetricParams {
  double lambda = 0.0;
  double tau = 0.0;
  double alpha = 0.0;
  double lambda_sse = 0.0;
  double tau_tilde = 0.0;
  NormalizationRule rule = NormalizationRule::PaperL2;
  bool sse_fallback = false;  // all-zero map: encode as plain SSE
};

struct GopStructure {
  int length = 4;  // IPPP...; frame i is I iff i % length == 0
};

ImportanceMap compute_map(const WrapperParams& g2, const PackedFrame& z,
                          const SketchSpec& spec, int frame_index = 0);

// Exact diag(J_g^T J_g) via one VJP per output coordinate; test oracle.
ImportanceMap exact_map(const WrapperParams& g2, const PackedFrame& z,
                        std::size_t safety_cap = std::size_t(1) << 16);

MetricParams derive_metric_params(const ImportanceMap& map, double alpha,
                                  double lambda_sse, NormalizationRule rule,
                                  std::size_t n_p);

// One map per I frame, shared by the P frames of its GOP.
std::vector<std::shared_ptr<const ImportanceMap>> assign_maps_iwa(
    const GopStructure& gop, const std::vector<PackedFrame>& frames,
    const WrapperParams& g2, const SketchSpec& spec);

ImportanceMap average_maps(const std::vector<ImportanceMap>& maps);

void save_map(const ImportanceMap& map, const std::string& path);
ImportanceMap load_map(const std::string& path);

}  // namespace warpco

#endif  // WARPCO_IMPORTANCE_HPP_
