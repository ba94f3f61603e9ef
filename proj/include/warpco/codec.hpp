#ifndef WARPCO_CODEC_HPP_
#define WARPCO_CODEC_HPP_

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "warpco/dct.hpp"
#include "warpco/importance.hpp"
#include "warpco/tensor.hpp"

namespace warpco {

enum class RdoMode : std::uint8_t { SSE = 0, WA = 1, IWA = 2, FWA = 3 };
enum class FrameType : std::uint8_t { I = 0, P = 1 };
enum class BlockMode : std::uint8_t { Skip = 0, Residual = 1 };

inline constexpr int kCtuSize = 16;
inline constexpr int kSubSize = 8;
// The 2-bit qp-offset field always indexes this table, independent of which
// offsets the encoder was allowed to try.
inline constexpr int kQpOffsetTable[3] = {-2, 0, 2};
inline constexpr int kZeroOffsetIndex = 1;

// Distortion used for all mode/partition/motion decisions. Weighted form:
// sum_j (h_j + tau) q_j^2 with h sliced at the block's frame position.
struct DistortionMetric {
  bool weighted = false;
  std::shared_ptr<const ImportanceMap> map;
  MetricParams params;

  double lambda() const { return params.lambda; }
  static DistortionMetric sse(double lambda_sse);
  static DistortionMetric weighted_sse(std::shared_ptr<const ImportanceMap> m,
                                       const MetricParams& p);
};

struct EncoderConfig {
  int base_qp = 24;
  std::vector<int> qp_offset_candidates = {-2, 0, 2};  // must include 0
  GopStructure gop;
  int search_range = 1;
  double lambda_c = 0.57;
  bool allow_split = true;
  double alpha = 0.05;
  NormalizationRule rule = NormalizationRule::PaperL2;
  SketchSpec sketch;
  bool record_candidates = false;

  void validate() const;
};

struct BlockDecision {
  BlockMode mode = BlockMode::Skip;
  int qp_offset_index = kZeroOffsetIndex;
  int mv_y = 0;
  int mv_x = 0;
  std::vector<std::pair<std::uint32_t, std::int32_t>> pairs;  // (run, level)
};

struct CandidateRecord {
  BlockDecision decision;
  double distortion = 0.0;
  std::uint64_t bits = 0;
};

struct BlockRecord {
  int y = 0;
  int x = 0;
  int size = kCtuSize;
  BlockDecision decision;
  double distortion = 0.0;  // under the frame's metric
  double sse = 0.0;
  std::uint64_t bits = 0;
  std::vector<CandidateRecord> candidates;  // filled when record_candidates
};

struct FrameRecord {
  FrameType type = FrameType::I;
  float mu = 0.0f;
  float sigma = 1.0f;
  std::uint64_t total_bits = 0;
  std::uint64_t overhead_bits = 0;  // frame header + split flags + padding
  std::vector<BlockRecord> blocks;
  PackedFrame recon;         // normalized domain
  PackedFrame recon_denorm;  // recon * sigma + mu
};

struct SequenceHeader {
  int c_red = 0;
  int height = 0;
  int width = 0;
  int tile_rows = 0;
  int tile_cols = 0;
  int frame_count = 0;
  int base_qp = 0;
  RdoMode metric_id = RdoMode::SSE;
  int gop_length = 1;
  int search_range = 0;

  TilingLayout layout() const;
};

struct Bitstream {
  std::vector<std::uint8_t> bytes;
  SequenceHeader header;
  std::uint64_t stream_header_bits = 0;
  std::vector<FrameRecord> frames;
};

struct DecodedSequence {
  SequenceHeader header;
  std::vector<PackedFrame> frames;      // denormalized
  std::vector<PackedFrame> normalized;  // decoder-side recon before denorm
};

// Low-level pieces, exposed for tests.

double lambda_sse_from_qp(int qp, double c = 0.57);
double quant_step_from_qp(int qp);

double block_distortion(const DistortionMetric& metric, const Block2D& orig,
                        const Block2D& recon, int y, int x, int frame_h,
                        int frame_w);

struct RdCandidate {
  BlockDecision decision;
  double distortion = 0.0;
  std::uint64_t bits = 0;
};

// Index of the argmin of distortion + lambda * bits; ties prefer fewer bits
// then the earlier candidate.
std::size_t rdo_select(const std::vector<RdCandidate>& candidates,
                       double lambda);

struct RdoqResult {
  std::vector<std::pair<std::uint32_t, std::int32_t>> pairs;
  std::uint64_t estimated_bits = 0;  // pair-count prefix + per-pair codes
};

RdoqResult rdoq_quantize(const Block2D& coeffs, double delta, double lambda,
                         double mean_weight);

Block2D get_block(const PackedFrame& frame, int y, int x, int size);
void put_block(PackedFrame& frame, int y, int x, const Block2D& block);

// Intra DC from reconstructed neighbors, or clamped motion-compensated copy
// from the previous frame's reconstruction mapped into the current frame's
// normalization.
Block2D predict_block(FrameType type, const PackedFrame& canvas,
                      const PackedFrame* ref, int y, int x, int size, int mv_y,
                      int mv_x);

std::pair<int, int> motion_search(const Block2D& orig, const PackedFrame& ref,
                                  int y, int x, int range,
                                  const DistortionMetric& metric);

// Per-frame maps for a mode (empty for SSE); maps depend on content and the
// sketch seed, not on QP, so callers may reuse them across a QP sweep.
std::vector<std::shared_ptr<const ImportanceMap>> mode_maps(
    const std::vector<PackedFrame>& frames, const WrapperParams& wrapper,
    RdoMode mode, const EncoderConfig& cfg,
    std::shared_ptr<const ImportanceMap> frozen = {});

// Weighted metric for one map at cfg.base_qp, or the documented SSE
// fallback when the map is all zero.
DistortionMetric metric_from_map(std::shared_ptr<const ImportanceMap> map,
                                 const EncoderConfig& cfg, std::size_t n_p);

Bitstream encode_sequence(const std::vector<PackedFrame>& frames,
                          const WrapperParams& wrapper, RdoMode mode,
                          const EncoderConfig& cfg,
                          std::shared_ptr<const ImportanceMap> frozen = {});

// Explicit per-frame metrics with a caller-declared header mode byte; the
// mode-specific entry above is a thin wrapper over this.
Bitstream encode_sequence_with_metrics(
    const std::vector<PackedFrame>& frames,
    const std::vector<DistortionMetric>& metrics, RdoMode declared_mode,
    const EncoderConfig& cfg);

DecodedSequence decode_sequence(const std::vector<std::uint8_t>& bytes);

}  // namespace warpco

#endif  // WARPCO_CODEC_HPP_
