#ifndef WARPCO_HARNESS_HPP_
#define WARPCO_HARNESS_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "warpco/codec.hpp"
#include "warpco/tensor.hpp"
#include "warpco/wrapper.hpp"

namespace warpco {

// Synthetic feature sequences: per channel, AR(1) over time on spatially
// blurred white noise, so P frames have something to predict from.
struct SynthConfig {
  std::uint64_t seed = 1;
  int channels = 16;
  int height = 16;
  int width = 16;
  int frame_count = 8;
  int blur_radius = 1;
  double rho = 0.9;
  double sigma_decay = 0.8;          // sigma_c = decay^c when profile empty
  std::vector<double> channel_sigma;  // explicit per-channel profile

  void validate() const;
  double sigma_for(int c) const;
};

std::vector<FeatureTensor> gen_synthetic_sequence(const SynthConfig& cfg);

// 10*log10(Var(ref) / MSE) pooled over the sequence; +inf when MSE is 0.
double quality_fsnr(const std::vector<FeatureTensor>& ref,
                    const std::vector<FeatureTensor>& hat);

struct RdPoint {
  int qp = 0;
  double bits_per_frame = 0.0;
  double fsnr_y_db = 0.0;
  double sse_z = 0.0;
  double sse_y = 0.0;
  double encode_ms = 0.0;
};

struct RdCurve {
  std::string label;
  std::string mode;
  std::vector<RdPoint> points;  // sorted by rate
};

enum class TimingMode { Wall, None };

struct SweepOptions {
  std::vector<int> qps;
  TimingMode timing = TimingMode::Wall;
  std::shared_ptr<const ImportanceMap> frozen;  // fwa input
  std::optional<double> flat_map_override;  // constant-h metric, test hook
  bool share_maps_across_qps = false;
  std::string label;  // defaults to the mode name
};

RdCurve sweep(const std::vector<FeatureTensor>& y, const WrapperParams& wrapper,
              RdoMode mode, const EncoderConfig& cfg, const SweepOptions& opt);

const char* mode_name(RdoMode mode);
RdoMode mode_from_name(const std::string& name);

enum class BdMetric { Rate, Quality };

struct BdResult {
  double value = 0.0;           // percent for Rate, dB for Quality
  bool monotone_warning = false;
};

BdResult bd_delta(const RdCurve& anchor, const RdCurve& test, BdMetric metric);

struct HighRateRecord {
  int qp = 0;
  double bits_per_frame = 0.0;
  double term_main = 0.0;
  double term_cross = 0.0;
  double term_eta = 0.0;
  double ratio = 0.0;  // +inf when the cross term vanishes
};

std::vector<HighRateRecord> validate_high_rate(
    const std::vector<FeatureTensor>& y, const WrapperParams& wrapper,
    const std::vector<int>& qps, const EncoderConfig& cfg);

struct BdRow {
  std::string anchor;
  std::string test;
  double bd_rate_pct = 0.0;
  double bd_quality_db = 0.0;
  bool warning = false;
};

struct Report {
  std::vector<RdCurve> curves;
  std::vector<BdRow> bd;
  std::vector<HighRateRecord> high_rate;
};

// format "csv" or "json". CSV writes the curve table at path and, when
// present, BD and high-rate tables at stem_bd/stem_hr side files; JSON
// holds everything in one document.
void emit_report(const Report& report, const std::string& path,
                 const std::string& format);
Report load_report_json(const std::string& path);

// Rank correlation with midrank ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// Shortest round-trip decimal form, locale-free.
std::string format_double(double v);

}  // namespace warpco

#endif  // WARPCO_HARNESS_HPP_
