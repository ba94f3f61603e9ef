#include "warpco/codec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "warpco/bitio.hpp"
#include "warpco/error.hpp"

namespace warpco {

DistortionMetric DistortionMetric::sse(double lambda_sse) {
  if (!(lambda_sse >= 0.0) || !std::isfinite(lambda_sse))
    throw ConfigError("lambda must be finite and non-negative");
  DistortionMetric m;
  m.weighted = false;
  m.params.lambda = lambda_sse;
  m.params.lambda_sse = lambda_sse;
  return m;
}

DistortionMetric DistortionMetric::weighted_sse(
    std::shared_ptr<const ImportanceMap> map, const MetricParams& p) {
  if (!map) throw InputError("weighted metric needs a map");
  map->validate();
  if (!(p.lambda >= 0.0) || !std::isfinite(p.lambda) || !(p.tau >= 0.0) ||
      !std::isfinite(p.tau))
    throw ConfigError("lambda and tau must be finite and non-negative");
  DistortionMetric m;
  m.weighted = true;
  m.map = std::move(map);
  m.params = p;
  return m;
}

void EncoderConfig::validate() const {
  if (base_qp < 0 || base_qp > 51) throw ConfigError("base QP out of 0..51");
  if (qp_offset_candidates.empty())
    throw ConfigError("qp offset candidate set is empty");
  bool has_zero = false;
  for (std::size_t i = 0; i < qp_offset_candidates.size(); ++i) {
    int off = qp_offset_candidates[i];
    if (off != -2 && off != 0 && off != 2)
      throw ConfigError("qp offsets must come from {-2, 0, +2}");
    if (off == 0) has_zero = true;
    for (std::size_t j = 0; j < i; ++j)
      if (qp_offset_candidates[j] == off)
        throw ConfigError("duplicate qp offset candidate");
  }
  if (!has_zero) throw ConfigError("qp offset candidates must include 0");
  if (gop.length < 1 || gop.length > 255)
    throw ConfigError("gop length out of 1..255");
  if (search_range < 0 || search_range > 255)
    throw ConfigError("search range out of 0..255");
  if (!(lambda_c > 0.0)) throw ConfigError("lambda constant must be positive");
  if (alpha < 0.0) throw ConfigError("alpha must be non-negative");
  if (sketch.n_s < 1) throw ConfigError("sketch dimension must be >= 1");
}

TilingLayout SequenceHeader::layout() const {
  if (tile_rows < 1 || tile_cols < 1 || height % tile_rows != 0 ||
      width % tile_cols != 0)
    throw ShapeError("header tile grid does not divide the frame");
  TilingLayout lay{tile_rows, tile_cols, c_red, height / tile_rows,
                   width / tile_cols};
  lay.validate();
  return lay;
}

double lambda_sse_from_qp(int qp, double c) {
  if (qp < 0 || qp > 51) throw ConfigError("QP out of 0..51");
  if (!(c > 0.0)) throw ConfigError("lambda constant must be positive");
  return c * std::exp2((qp - 12) / 3.0);
}

double quant_step_from_qp(int qp) {
  if (qp < 0 || qp > 51) throw ConfigError("QP out of 0..51");
  return std::exp2((qp - 4) / 6.0);
}

double block_distortion(const DistortionMetric& metric, const Block2D& orig,
                        const Block2D& recon, int y, int x, int frame_h,
                        int frame_w) {
  if (orig.size != recon.size) throw ShapeError("block sizes differ");
  const int size = orig.size;
  if (y < 0 || x < 0 || y + size > frame_h || x + size > frame_w)
    throw ShapeError("block position out of frame bounds");
  if (metric.weighted &&
      metric.map->weights.size() !=
          static_cast<std::size_t>(frame_h) * frame_w)
    throw ShapeError("importance map does not match frame size");
  double acc = 0.0;
  if (metric.weighted) {
    const double tau = metric.params.tau;
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j) {
        double q = recon.at(i, j) - orig.at(i, j);
        double h = metric.map->w(static_cast<std::size_t>(y + i) * frame_w +
                                 (x + j));
        acc += (h + tau) * (q * q);
      }
  } else {
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j) {
        double q = recon.at(i, j) - orig.at(i, j);
        acc += q * q;
      }
  }
  return acc;
}

std::size_t rdo_select(const std::vector<RdCandidate>& candidates,
                       double lambda) {
  if (candidates.empty()) throw InputError("no rdo candidates");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  std::size_t best = 0;
  double best_cost = candidates[0].distortion +
                     lambda * static_cast<double>(candidates[0].bits);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    double cost = candidates[i].distortion +
                  lambda * static_cast<double>(candidates[i].bits);
    if (cost < best_cost ||
        (cost == best_cost && candidates[i].bits < candidates[best].bits))
      best = i, best_cost = cost;
  }
  return best;
}

RdoqResult rdoq_quantize(const Block2D& coeffs, double delta, double lambda,
                         double mean_weight) {
  if (!(delta > 0.0)) throw ConfigError("quantization step must be positive");
  if (!(mean_weight >= 0.0)) throw ConfigError("mean weight must be >= 0");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  const ScanOrder& scan = zigzag_order(coeffs.size);
  RdoqResult out;
  std::uint32_t run = 0;
  for (int k = 0; k < coeffs.sample_count(); ++k) {
    double c = coeffs.samples[scan.order[k]];
    if (!std::isfinite(c)) throw InputError("non-finite coefficient");
    const double clamp_hi = static_cast<double>(1L << 30);
    double ratio = std::clamp(c / delta, -clamp_hi, clamp_hi);
    long rounded = std::lround(ratio);
    long truncated = static_cast<long>(ratio);
    long cands[3] = {rounded, truncated, 0};
    double best_cost = std::numeric_limits<double>::infinity();
    long best_level = 0;
    for (int ci = 0; ci < 3; ++ci) {
      long level = cands[ci];
      bool seen = false;
      for (int cj = 0; cj < ci; ++cj)
        if (cands[cj] == level) seen = true;
      if (seen) continue;
      double err = c - static_cast<double>(level) * delta;
      double cost = mean_weight * err * err;
      if (level != 0)
        cost += lambda *
                (BitWriter::se_bits(static_cast<std::int32_t>(level)) +
                 BitWriter::ue_bits(run));
      if (cost < best_cost) {
        best_cost = cost;
        best_level = level;
      }
    }
    if (best_level != 0) {
      out.pairs.emplace_back(run, static_cast<std::int32_t>(best_level));
      out.estimated_bits +=
          BitWriter::se_bits(static_cast<std::int32_t>(best_level)) +
          BitWriter::ue_bits(run);
      run = 0;
    } else {
      ++run;
    }
  }
  out.estimated_bits +=
      BitWriter::ue_bits(static_cast<std::uint32_t>(out.pairs.size()));
  return out;
}

Block2D get_block(const PackedFrame& frame, int y, int x, int size) {
  if (y < 0 || x < 0 || y + size > frame.height || x + size > frame.width)
    throw ShapeError("block region out of frame bounds");
  Block2D b(size);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) b.at(i, j) = frame.at(y + i, x + j);
  return b;
}

void put_block(PackedFrame& frame, int y, int x, const Block2D& block) {
  if (y < 0 || x < 0 || y + block.size > frame.height ||
      x + block.size > frame.width)
    throw ShapeError("block region out of frame bounds");
  for (int i = 0; i < block.size; ++i)
    for (int j = 0; j < block.size; ++j) frame.at(y + i, x + j) = block.at(i, j);
}

Block2D predict_block(FrameType type, const PackedFrame& canvas,
                      const PackedFrame* ref, int y, int x, int size, int mv_y,
                      int mv_x) {
  Block2D pred(size);
  if (type == FrameType::I) {
    double sum = 0.0;
    int n = 0;
    if (y > 0)
      for (int j = 0; j < size; ++j) {
        sum += canvas.at(y - 1, x + j);
        ++n;
      }
    if (x > 0)
      for (int i = 0; i < size; ++i) {
        sum += canvas.at(y + i, x - 1);
        ++n;
      }
    double dc = n > 0 ? sum / n : 0.0;
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j) pred.at(i, j) = dc;
  } else {
    if (!ref) throw StateError("P frame prediction without a reference");
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j) {
        int yy = std::clamp(y + i + mv_y, 0, ref->height - 1);
        int xx = std::clamp(x + j + mv_x, 0, ref->width - 1);
        pred.at(i, j) = ref->at(yy, xx);
      }
  }
  return pred;
}

std::pair<int, int> motion_search(const Block2D& orig, const PackedFrame& ref,
                                  int y, int x, int range,
                                  const DistortionMetric& metric) {
  if (range < 0) throw ConfigError("search range must be >= 0");
  const double lambda = metric.lambda();
  double best_cost = std::numeric_limits<double>::infinity();
  int best_l1 = 0, best_dy = 0, best_dx = 0;
  for (int dy = -range; dy <= range; ++dy)
    for (int dx = -range; dx <= range; ++dx) {
      Block2D pred =
          predict_block(FrameType::P, ref, &ref, y, x, orig.size, dy, dx);
      double d = block_distortion(metric, orig, pred, y, x, ref.height,
                                  ref.width);
      double cost =
          d + lambda * (BitWriter::se_bits(dy) + BitWriter::se_bits(dx));
      int l1 = std::abs(dy) + std::abs(dx);
      if (cost < best_cost || (cost == best_cost && l1 < best_l1)) {
        best_cost = cost;
        best_l1 = l1;
        best_dy = dy;
        best_dx = dx;
      }
    }
  return {best_dy, best_dx};
}

namespace {

int qp_offset_index_of(int offset) {
  for (int i = 0; i < 3; ++i)
    if (kQpOffsetTable[i] == offset) return i;
  throw ConfigError("qp offset not in the canonical table");
}

int effective_qp(int base_qp, int offset_index) {
  return std::clamp(base_qp + kQpOffsetTable[offset_index], 0, 51);
}

// Dequantized residual from the coded pairs, shared by both codec sides.
Block2D residual_from_pairs(
    const std::vector<std::pair<std::uint32_t, std::int32_t>>& pairs,
    double delta, int size) {
  Block2D coeffs(size);
  const ScanOrder& scan = zigzag_order(size);
  std::size_t pos = 0;
  for (const auto& [run, level] : pairs) {
    pos += run;
    if (pos >= static_cast<std::size_t>(size) * size)
      throw BitstreamError("coefficient run past block end", 0);
    coeffs.samples[scan.order[pos]] = static_cast<double>(level) * delta;
    ++pos;
  }
  return dct2_inverse(coeffs);
}

Block2D decision_recon(const BlockDecision& d, FrameType type,
                       const PackedFrame& canvas, const PackedFrame* ref,
                       int y, int x, int size, int base_qp) {
  Block2D recon =
      predict_block(type, canvas, ref, y, x, size, d.mv_y, d.mv_x);
  if (d.mode == BlockMode::Residual) {
    int qp = effective_qp(base_qp, d.qp_offset_index);
    Block2D res = residual_from_pairs(d.pairs, quant_step_from_qp(qp), size);
    for (int i = 0; i < recon.sample_count(); ++i)
      recon.samples[i] += res.samples[i];
  }
  return recon;
}

void write_leaf(BitWriter& w, const BlockDecision& d, FrameType type) {
  w.bit(d.mode == BlockMode::Residual ? 1 : 0);
  w.bits(static_cast<std::uint32_t>(d.qp_offset_index), 2);
  if (d.mode != BlockMode::Residual) return;
  if (type == FrameType::P) {
    w.se(d.mv_y);
    w.se(d.mv_x);
  }
  w.ue(static_cast<std::uint32_t>(d.pairs.size()));
  for (const auto& [run, level] : d.pairs) {
    w.ue(run);
    w.se(level);
  }
}

std::uint64_t leaf_bits(const BlockDecision& d, FrameType type) {
  BitWriter scratch;
  write_leaf(scratch, d, type);
  return scratch.bit_position();
}

BlockDecision read_leaf(BitReader& r, FrameType type, int search_range,
                        int size) {
  BlockDecision d;
  d.mode = r.bit() ? BlockMode::Residual : BlockMode::Skip;
  std::uint64_t at = r.bit_position();
  d.qp_offset_index = static_cast<int>(r.bits(2));
  if (d.qp_offset_index > 2)
    throw BitstreamError("invalid qp offset index", at);
  if (d.mode != BlockMode::Residual) return d;
  if (type == FrameType::P) {
    at = r.bit_position();
    d.mv_y = r.se();
    d.mv_x = r.se();
    if (std::abs(d.mv_y) > search_range || std::abs(d.mv_x) > search_range)
      throw BitstreamError("motion vector beyond search range", at);
  }
  at = r.bit_position();
  std::uint32_t count = r.ue();
  if (count > static_cast<std::uint32_t>(size) * size)
    throw BitstreamError("too many coefficient pairs", at);
  std::size_t pos = 0;
  for (std::uint32_t k = 0; k < count; ++k) {
    at = r.bit_position();
    std::uint32_t run = r.ue();
    std::int32_t level = r.se();
    if (level == 0) throw BitstreamError("zero coefficient level", at);
    pos += run;
    if (pos >= static_cast<std::size_t>(size) * size)
      throw BitstreamError("coefficient run past block end", at);
    ++pos;
    d.pairs.emplace_back(run, level);
  }
  return d;
}

double block_mean_weight(const DistortionMetric& metric, int y, int x,
                         int size, int frame_w) {
  if (!metric.weighted) return 1.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j)
      sum += metric.map->w(static_cast<std::size_t>(y + i) * frame_w + (x + j));
  return sum / (static_cast<double>(size) * size) + metric.params.tau;
}

struct LeafEval {
  BlockDecision decision;
  Block2D recon{kCtuSize};
  double distortion = 0.0;
  double sse = 0.0;
  std::uint64_t bits = 0;
  std::vector<CandidateRecord> recorded;
};

LeafEval evaluate_leaf(const PackedFrame& orig_frame,
                       const PackedFrame& canvas, const PackedFrame* ref,
                       FrameType type, int y, int x, int size,
                       const DistortionMetric& metric,
                       const EncoderConfig& cfg) {
  const int fh = orig_frame.height, fw = orig_frame.width;
  Block2D orig = get_block(orig_frame, y, x, size);
  std::vector<RdCandidate> candidates;
  std::vector<Block2D> recons;

  auto add = [&](BlockDecision d) {
    Block2D recon =
        decision_recon(d, type, canvas, ref, y, x, size, cfg.base_qp);
    RdCandidate c;
    c.distortion = block_distortion(metric, orig, recon, y, x, fh, fw);
    c.bits = leaf_bits(d, type);
    c.decision = std::move(d);
    candidates.push_back(std::move(c));
    recons.push_back(std::move(recon));
  };

  add(BlockDecision{});  // Skip

  int mv_y = 0, mv_x = 0;
  if (type == FrameType::P && cfg.search_range > 0) {
    auto mv = motion_search(orig, *ref, y, x, cfg.search_range, metric);
    mv_y = mv.first;
    mv_x = mv.second;
  }
  const double w_bar = block_mean_weight(metric, y, x, size, fw);
  for (int off : cfg.qp_offset_candidates) {
    BlockDecision d;
    d.mode = BlockMode::Residual;
    d.qp_offset_index = qp_offset_index_of(off);
    d.mv_y = mv_y;
    d.mv_x = mv_x;
    Block2D pred = predict_block(type, canvas, ref, y, x, size, mv_y, mv_x);
    Block2D res(size);
    for (int i = 0; i < res.sample_count(); ++i)
      res.samples[i] = orig.samples[i] - pred.samples[i];
    int qp = effective_qp(cfg.base_qp, d.qp_offset_index);
    d.pairs = rdoq_quantize(dct2_forward(res), quant_step_from_qp(qp),
                            metric.lambda(), w_bar)
                  .pairs;
    add(std::move(d));
  }

  std::size_t pick = rdo_select(candidates, metric.lambda());
  LeafEval out;
  out.decision = candidates[pick].decision;
  out.recon = recons[pick];
  out.distortion = candidates[pick].distortion;
  out.bits = candidates[pick].bits;
  DistortionMetric plain = DistortionMetric::sse(0.0);
  out.sse = block_distortion(plain, orig, out.recon, y, x, fh, fw);
  if (cfg.record_candidates)
    for (const RdCandidate& c : candidates)
      out.recorded.push_back({c.decision, c.distortion, c.bits});
  return out;
}

std::pair<float, float> frame_norm_stats(const PackedFrame& frame) {
  double sum = 0.0;
  for (double v : frame.data) sum += v;
  double mu = sum / static_cast<double>(frame.data.size());
  double var = 0.0;
  for (double v : frame.data) var += (v - mu) * (v - mu);
  var /= static_cast<double>(frame.data.size());
  float mu_f = static_cast<float>(mu);
  float sigma_f = static_cast<float>(std::sqrt(var));
  if (!(sigma_f > 0.0f) || !std::isfinite(sigma_f)) sigma_f = 1.0f;
  if (!std::isfinite(mu_f)) throw InputError("frame mean is non-finite");
  return {mu_f, sigma_f};
}

PackedFrame normalize_frame(const PackedFrame& raw, float mu, float sigma) {
  PackedFrame out(raw.layout);
  for (std::size_t i = 0; i < raw.data.size(); ++i)
    out.data[i] = (raw.data[i] - static_cast<double>(mu)) /
                  static_cast<double>(sigma);
  return out;
}

PackedFrame denormalize_frame(const PackedFrame& norm, float mu, float sigma) {
  PackedFrame out(norm.layout);
  for (std::size_t i = 0; i < norm.data.size(); ++i)
    out.data[i] = norm.data[i] * static_cast<double>(sigma) +
                  static_cast<double>(mu);
  return out;
}

// Encodes one CTU: evaluates unsplit vs split, commits the winner's recon to
// the canvas, and appends the exact syntax whose lengths were measured.
void encode_ctu(const PackedFrame& orig, PackedFrame& canvas,
                const PackedFrame* ref, FrameType type, int y, int x,
                const DistortionMetric& metric, const EncoderConfig& cfg,
                BitWriter& w, FrameRecord& rec) {
  const double lambda = metric.lambda();
  LeafEval whole =
      evaluate_leaf(orig, canvas, ref, type, y, x, kCtuSize, metric, cfg);

  bool split = false;
  std::vector<LeafEval> subs;
  if (cfg.allow_split) {
    std::uint64_t split_bits = 0;
    double split_cost = 0.0;
    for (int sy = 0; sy < kCtuSize; sy += kSubSize)
      for (int sx = 0; sx < kCtuSize; sx += kSubSize) {
        LeafEval e = evaluate_leaf(orig, canvas, ref, type, y + sy, x + sx,
                                   kSubSize, metric, cfg);
        put_block(canvas, y + sy, x + sx, e.recon);
        split_cost += e.distortion + lambda * static_cast<double>(e.bits);
        split_bits += e.bits;
        subs.push_back(std::move(e));
      }
    split_cost += lambda;  // split flag
    double whole_cost = whole.distortion +
                        lambda * static_cast<double>(whole.bits + 1);
    split = split_cost < whole_cost ||
            (split_cost == whole_cost && split_bits < whole.bits);
  }
  if (!split) put_block(canvas, y, x, whole.recon);

  w.bit(split ? 1 : 0);
  rec.overhead_bits += 1;
  auto emit = [&](const LeafEval& e, int by, int bx, int size) {
    std::uint64_t before = w.bit_position();
    write_leaf(w, e.decision, type);
    if (w.bit_position() - before != e.bits)
      throw StateError("leaf bit count mismatch");
    BlockRecord b;
    b.y = by;
    b.x = bx;
    b.size = size;
    b.decision = e.decision;
    b.distortion = e.distortion;
    b.sse = e.sse;
    b.bits = e.bits;
    b.candidates = e.recorded;
    rec.blocks.push_back(std::move(b));
  };
  if (split) {
    int k = 0;
    for (int sy = 0; sy < kCtuSize; sy += kSubSize)
      for (int sx = 0; sx < kCtuSize; sx += kSubSize)
        emit(subs[k++], y + sy, x + sx, kSubSize);
  } else {
    emit(whole, y, x, kCtuSize);
  }
}

FrameRecord encode_frame(const PackedFrame& norm, const PackedFrame& raw_ref,
                         bool has_ref, FrameType type, float mu, float sigma,
                         const DistortionMetric& metric,
                         const EncoderConfig& cfg, BitWriter& w) {
  FrameRecord rec;
  rec.type = type;
  rec.mu = mu;
  rec.sigma = sigma;
  rec.recon = PackedFrame(norm.layout);

  std::uint64_t start = w.bit_position();
  w.aligned_u8(static_cast<std::uint8_t>(type));
  w.aligned_f32(mu);
  w.aligned_f32(sigma);
  rec.overhead_bits = w.bit_position() - start;

  const PackedFrame* ref = has_ref ? &raw_ref : nullptr;
  for (int y = 0; y < norm.height; y += kCtuSize)
    for (int x = 0; x < norm.width; x += kCtuSize)
      encode_ctu(norm, rec.recon, ref, type, y, x, metric, cfg, w, rec);

  std::uint64_t before_align = w.bit_position();
  w.byte_align();
  rec.overhead_bits += w.bit_position() - before_align;
  rec.total_bits = w.bit_position() - start;

  std::uint64_t block_sum = 0;
  for (const BlockRecord& b : rec.blocks) block_sum += b.bits;
  if (block_sum + rec.overhead_bits != rec.total_bits)
    throw StateError("frame bit accounting mismatch");
  return rec;
}

void check_sequence_input(const std::vector<PackedFrame>& frames) {
  if (frames.empty()) throw InputError("no frames to encode");
  if (frames.size() > 65535) throw InputError("too many frames for a stream");
  const TilingLayout& lay = frames.front().layout;
  lay.validate();
  if (lay.frame_height() % kCtuSize != 0 || lay.frame_width() % kCtuSize != 0)
    throw ShapeError("packed frame dimensions must be multiples of " +
                     std::to_string(kCtuSize));
  if (lay.frame_height() > 4096 || lay.frame_width() > 4096)
    throw ShapeError("packed frame dimensions exceed the supported maximum");
  for (const PackedFrame& f : frames)
    if (!(f.layout == lay))
      throw ShapeError("frames in a sequence must share one layout");
}

}  // namespace

Bitstream encode_sequence_with_metrics(
    const std::vector<PackedFrame>& frames,
    const std::vector<DistortionMetric>& metrics, RdoMode declared_mode,
    const EncoderConfig& cfg) {
  cfg.validate();
  check_sequence_input(frames);
  if (metrics.size() != frames.size())
    throw ShapeError("one metric per frame required");
  const TilingLayout& lay = frames.front().layout;
  const std::size_t n_p =
      static_cast<std::size_t>(lay.frame_height()) * lay.frame_width();
  for (const DistortionMetric& m : metrics)
    if (m.weighted && m.map->weights.size() != n_p)
      throw ShapeError("importance map length does not match frame size");

  Bitstream out;
  out.header.c_red = lay.reduced_channels;
  out.header.height = lay.frame_height();
  out.header.width = lay.frame_width();
  out.header.tile_rows = lay.rows;
  out.header.tile_cols = lay.cols;
  out.header.frame_count = static_cast<int>(frames.size());
  out.header.base_qp = cfg.base_qp;
  out.header.metric_id = declared_mode;
  out.header.gop_length = cfg.gop.length;
  out.header.search_range = cfg.search_range;

  BitWriter w;
  w.magic("WAC1");
  w.aligned_u8(1);  // version
  w.aligned_u16(static_cast<std::uint16_t>(lay.reduced_channels));
  w.aligned_u16(static_cast<std::uint16_t>(out.header.height));
  w.aligned_u16(static_cast<std::uint16_t>(out.header.width));
  w.aligned_u8(static_cast<std::uint8_t>(lay.rows));
  w.aligned_u8(static_cast<std::uint8_t>(lay.cols));
  w.aligned_u16(static_cast<std::uint16_t>(frames.size()));
  w.aligned_u8(static_cast<std::uint8_t>(cfg.base_qp));
  w.aligned_u8(static_cast<std::uint8_t>(declared_mode));
  w.aligned_u8(static_cast<std::uint8_t>(cfg.gop.length));
  w.aligned_u8(static_cast<std::uint8_t>(cfg.search_range));
  out.stream_header_bits = w.bit_position();

  PackedFrame prev_denorm(lay);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    FrameType type = (i % static_cast<std::size_t>(cfg.gop.length) == 0)
                         ? FrameType::I
                         : FrameType::P;
    auto [mu, sigma] = frame_norm_stats(frames[i]);
    PackedFrame norm = normalize_frame(frames[i], mu, sigma);
    PackedFrame ref(lay);
    bool has_ref = type == FrameType::P;
    if (has_ref) ref = normalize_frame(prev_denorm, mu, sigma);
    FrameRecord rec = encode_frame(norm, ref, has_ref, type, mu, sigma,
                                   metrics[i], cfg, w);
    rec.recon_denorm = denormalize_frame(rec.recon, mu, sigma);
    prev_denorm = rec.recon_denorm;
    out.frames.push_back(std::move(rec));
  }
  out.bytes = w.bytes();
  return out;
}

std::vector<std::shared_ptr<const ImportanceMap>> mode_maps(
    const std::vector<PackedFrame>& frames, const WrapperParams& wrapper,
    RdoMode mode, const EncoderConfig& cfg,
    std::shared_ptr<const ImportanceMap> frozen) {
  cfg.validate();
  check_sequence_input(frames);
  std::vector<std::shared_ptr<const ImportanceMap>> maps;
  switch (mode) {
    case RdoMode::SSE:
      break;
    case RdoMode::WA:
      for (std::size_t i = 0; i < frames.size(); ++i)
        maps.push_back(std::make_shared<const ImportanceMap>(compute_map(
            wrapper, frames[i], cfg.sketch, static_cast<int>(i))));
      break;
    case RdoMode::IWA:
      maps = assign_maps_iwa(cfg.gop, frames, wrapper, cfg.sketch);
      break;
    case RdoMode::FWA:
      if (!frozen) throw ConfigError("fwa mode needs a frozen map");
      maps.assign(frames.size(), frozen);
      break;
  }
  return maps;
}

DistortionMetric metric_from_map(std::shared_ptr<const ImportanceMap> map,
                                 const EncoderConfig& cfg, std::size_t n_p) {
  const double lambda_sse = lambda_sse_from_qp(cfg.base_qp, cfg.lambda_c);
  MetricParams p =
      derive_metric_params(*map, cfg.alpha, lambda_sse, cfg.rule, n_p);
  if (p.sse_fallback) return DistortionMetric::sse(lambda_sse);
  return DistortionMetric::weighted_sse(std::move(map), p);
}

Bitstream encode_sequence(const std::vector<PackedFrame>& frames,
                          const WrapperParams& wrapper, RdoMode mode,
                          const EncoderConfig& cfg,
                          std::shared_ptr<const ImportanceMap> frozen) {
  cfg.validate();
  check_sequence_input(frames);
  const TilingLayout& lay = frames.front().layout;
  const std::size_t n_p =
      static_cast<std::size_t>(lay.frame_height()) * lay.frame_width();
  std::vector<DistortionMetric> metrics;
  metrics.reserve(frames.size());
  if (mode == RdoMode::SSE) {
    metrics.assign(frames.size(), DistortionMetric::sse(lambda_sse_from_qp(
                                      cfg.base_qp, cfg.lambda_c)));
  } else {
    for (auto& map : mode_maps(frames, wrapper, mode, cfg, std::move(frozen)))
      metrics.push_back(metric_from_map(std::move(map), cfg, n_p));
  }
  return encode_sequence_with_metrics(frames, metrics, mode, cfg);
}

DecodedSequence decode_sequence(const std::vector<std::uint8_t>& bytes) {
  BitReader r(bytes);
  r.expect_magic("WAC1");
  std::uint64_t at = r.bit_position();
  if (r.aligned_u8() != 1)
    throw BitstreamError("unsupported bitstream version", at);
  SequenceHeader h;
  h.c_red = r.aligned_u16();
  h.height = r.aligned_u16();
  h.width = r.aligned_u16();
  h.tile_rows = r.aligned_u8();
  h.tile_cols = r.aligned_u8();
  h.frame_count = r.aligned_u16();
  h.base_qp = r.aligned_u8();
  std::uint64_t metric_at = r.bit_position();
  std::uint8_t metric = r.aligned_u8();
  if (metric > 3) throw BitstreamError("unknown metric id", metric_at);
  h.metric_id = static_cast<RdoMode>(metric);
  h.gop_length = r.aligned_u8();
  h.search_range = r.aligned_u8();

  if (h.height < kCtuSize || h.width < kCtuSize ||
      h.height % kCtuSize != 0 || h.width % kCtuSize != 0 ||
      h.height > 4096 || h.width > 4096)
    throw BitstreamError("invalid frame dimensions in header", at);
  if (h.frame_count < 1)
    throw BitstreamError("empty stream", at);
  if (h.base_qp > 51) throw BitstreamError("base QP out of range", at);
  if (h.gop_length < 1) throw BitstreamError("invalid gop length", at);
  TilingLayout lay;
  try {
    lay = h.layout();
  } catch (const Error& e) {
    throw BitstreamError(e.what(), at);
  }

  DecodedSequence out;
  out.header = h;
  PackedFrame prev_denorm(lay);
  for (int f = 0; f < h.frame_count; ++f) {
    try {
      std::uint64_t fat = r.bit_position();
      std::uint8_t type_byte = r.aligned_u8();
      if (type_byte > 1) throw BitstreamError("unknown frame type", fat);
      FrameType type = static_cast<FrameType>(type_byte);
      if (type == FrameType::P && f == 0)
        throw BitstreamError("P frame without a reference", fat);
      float mu = r.aligned_f32();
      float sigma = r.aligned_f32();
      if (!std::isfinite(mu) || !std::isfinite(sigma) || !(sigma > 0.0f))
        throw BitstreamError("invalid frame normalization", fat);

      PackedFrame canvas(lay);
      PackedFrame ref(lay);
      bool has_ref = type == FrameType::P;
      if (has_ref) ref = normalize_frame(prev_denorm, mu, sigma);
      for (int y = 0; y < h.height; y += kCtuSize)
        for (int x = 0; x < h.width; x += kCtuSize) {
          bool split = r.bit() != 0;
          if (split) {
            for (int sy = 0; sy < kCtuSize; sy += kSubSize)
              for (int sx = 0; sx < kCtuSize; sx += kSubSize) {
                BlockDecision d =
                    read_leaf(r, type, h.search_range, kSubSize);
                put_block(canvas, y + sy, x + sx,
                          decision_recon(d, type, canvas,
                                         has_ref ? &ref : nullptr, y + sy,
                                         x + sx, kSubSize, h.base_qp));
              }
          } else {
            BlockDecision d = read_leaf(r, type, h.search_range, kCtuSize);
            put_block(canvas, y, x,
                      decision_recon(d, type, canvas,
                                     has_ref ? &ref : nullptr, y, x, kCtuSize,
                                     h.base_qp));
          }
        }
      r.byte_align();
      out.normalized.push_back(canvas);
      out.frames.push_back(denormalize_frame(canvas, mu, sigma));
      prev_denorm = out.frames.back();
    } catch (const BitstreamError& e) {
      if (e.frame_index() >= 0) throw;
      throw BitstreamError(e.raw_message(), e.bit_offset(), f);
    }
  }
  if (!r.at_end())
    throw BitstreamError("trailing data after last frame", r.bit_position());
  return out;
}

}  // namespace warpco
