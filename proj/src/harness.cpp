#include "warpco/harness.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "warpco/error.hpp"
#include "warpco/rng.hpp"

namespace warpco {

void SynthConfig::validate() const {
  if (channels < 1 || height < 1 || width < 1 || frame_count < 1)
    throw ConfigError("synthetic dimensions must be positive");
  if (blur_radius < 0) throw ConfigError("blur radius must be >= 0");
  if (!(rho >= 0.0) || rho >= 1.0) throw ConfigError("rho must be in [0, 1)");
  if (!channel_sigma.empty() &&
      channel_sigma.size() != static_cast<std::size_t>(channels))
    throw ConfigError("channel sigma profile length must match channels");
  for (double s : channel_sigma)
    if (!(s >= 0.0) || !std::isfinite(s))
      throw ConfigError("channel sigmas must be finite and >= 0");
  if (channel_sigma.empty() && (!(sigma_decay >= 0.0) || sigma_decay > 1.0))
    throw ConfigError("sigma decay must be in [0, 1]");
}

double SynthConfig::sigma_for(int c) const {
  if (!channel_sigma.empty()) return channel_sigma[c];
  return std::pow(sigma_decay, c);
}

namespace {

std::vector<double> blur_kernel(int radius) {
  std::vector<double> k(2 * radius + 1);
  double sigma = std::max(radius / 2.0, 0.5);
  for (int i = -radius; i <= radius; ++i)
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  double sq = 0.0;
  for (double v : k) sq += v * v;
  double inv = 1.0 / std::sqrt(sq);
  for (double& v : k) v *= inv;
  return k;
}

// Separable blur with zero padding, normalized so white noise keeps roughly
// unit variance away from the borders.
void blur_plane(std::vector<double>& plane, int h, int w,
                const std::vector<double>& k) {
  const int r = (static_cast<int>(k.size()) - 1) / 2;
  if (r == 0) return;
  std::vector<double> tmp(plane.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        int xx = x + i;
        if (xx < 0 || xx >= w) continue;
        acc += k[i + r] * plane[y * w + xx];
      }
      tmp[y * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        int yy = y + i;
        if (yy < 0 || yy >= h) continue;
        acc += k[i + r] * tmp[yy * w + x];
      }
      plane[y * w + x] = acc;
    }
}

std::string file_stem_suffix(const std::string& path,
                             const std::string& suffix) {
  std::size_t slash = path.find_last_of('/');
  std::size_t dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return path + suffix;
  return path.substr(0, dot) + suffix + path.substr(dot);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace

std::vector<FeatureTensor> gen_synthetic_sequence(const SynthConfig& cfg) {
  cfg.validate();
  const std::vector<double> kernel = blur_kernel(cfg.blur_radius);
  const std::size_t plane = static_cast<std::size_t>(cfg.height) * cfg.width;
  std::vector<FeatureTensor> frames;
  frames.reserve(cfg.frame_count);
  const double innov = std::sqrt(1.0 - cfg.rho * cfg.rho);
  for (int t = 0; t < cfg.frame_count; ++t) {
    FeatureTensor f(cfg.channels, cfg.height, cfg.width);
    for (int c = 0; c < cfg.channels; ++c) {
      RngStream stream{cfg.seed,
                       1000 + static_cast<std::uint64_t>(t) * cfg.channels +
                           static_cast<std::uint64_t>(c),
                       0};
      std::vector<double> fresh = gaussian_sequence(stream, plane, 1.0);
      blur_plane(fresh, cfg.height, cfg.width, kernel);
      double sc = cfg.sigma_for(c);
      double* dst = &f.data[static_cast<std::size_t>(c) * plane];
      if (t == 0) {
        for (std::size_t i = 0; i < plane; ++i) dst[i] = fresh[i] * sc;
      } else {
        const double* prev =
            &frames.back().data[static_cast<std::size_t>(c) * plane];
        for (std::size_t i = 0; i < plane; ++i)
          dst[i] = cfg.rho * prev[i] + innov * fresh[i] * sc;
      }
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

double quality_fsnr(const std::vector<FeatureTensor>& ref,
                    const std::vector<FeatureTensor>& hat) {
  if (ref.size() != hat.size() || ref.empty())
    throw ShapeError("sequences must be non-empty and the same length");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (!ref[i].same_shape(hat[i]))
      throw ShapeError("sequence tensors have mismatched shapes");
    for (double v : ref[i].data) sum += v;
    count += ref[i].data.size();
  }
  double mean = sum / static_cast<double>(count);
  double var = 0.0, mse = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i)
    for (std::size_t j = 0; j < ref[i].data.size(); ++j) {
      double r = ref[i].data[j];
      var += (r - mean) * (r - mean);
      double d = hat[i].data[j] - r;
      mse += d * d;
    }
  var /= static_cast<double>(count);
  mse /= static_cast<double>(count);
  if (var == 0.0) throw InputError("zero-variance reference sequence");
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(var / mse);
}

const char* mode_name(RdoMode mode) {
  switch (mode) {
    case RdoMode::SSE: return "sse";
    case RdoMode::WA: return "wa";
    case RdoMode::IWA: return "iwa";
    case RdoMode::FWA: return "fwa";
  }
  throw ConfigError("unknown rdo mode");
}

RdoMode mode_from_name(const std::string& name) {
  if (name == "sse") return RdoMode::SSE;
  if (name == "wa") return RdoMode::WA;
  if (name == "iwa") return RdoMode::IWA;
  if (name == "fwa") return RdoMode::FWA;
  throw ConfigError("unknown rdo mode '" + name + "'");
}

RdCurve sweep(const std::vector<FeatureTensor>& y, const WrapperParams& wrapper,
              RdoMode mode, const EncoderConfig& cfg,
              const SweepOptions& opt) {
  if (opt.qps.empty()) throw ConfigError("no qps to sweep");
  if (y.empty()) throw InputError("no frames to sweep");
  wrapper.validate();

  std::vector<PackedFrame> packed;
  packed.reserve(y.size());
  TilingLayout layout;
  for (std::size_t i = 0; i < y.size(); ++i) {
    FeatureTensor z = reduce_forward(wrapper, y[i]);
    if (i == 0) layout = TilingLayout::square_grid(z.channels, z.height, z.width);
    packed.push_back(pack_tiles(z, layout));
  }
  const std::size_t n_p =
      static_cast<std::size_t>(layout.frame_height()) * layout.frame_width();

  std::vector<std::shared_ptr<const ImportanceMap>> shared_maps;
  if (opt.share_maps_across_qps && mode != RdoMode::SSE &&
      !opt.flat_map_override)
    shared_maps = mode_maps(packed, wrapper, mode, cfg, opt.frozen);

  RdCurve curve;
  curve.mode = mode_name(mode);
  curve.label = opt.label.empty() ? curve.mode : opt.label;
  for (int qp : opt.qps) {
    EncoderConfig c2 = cfg;
    c2.base_qp = qp;
    auto t0 = std::chrono::steady_clock::now();
    Bitstream bits;
    if (opt.flat_map_override) {
      double h0 = *opt.flat_map_override;
      if (!(h0 > 0.0)) throw ConfigError("flat map override must be positive");
      auto map = std::make_shared<const ImportanceMap>(ImportanceMap{
          std::vector<float>(n_p, static_cast<float>(h0)), cfg.sketch.n_s,
          cfg.sketch.seed, MapSource::Frozen, 0});
      MetricParams p;
      p.lambda = h0 * lambda_sse_from_qp(qp, cfg.lambda_c);
      p.tau = 0.0;
      p.alpha = 0.0;
      p.lambda_sse = lambda_sse_from_qp(qp, cfg.lambda_c);
      p.tau_tilde = h0;
      p.rule = cfg.rule;
      std::vector<DistortionMetric> metrics(
          packed.size(), DistortionMetric::weighted_sse(map, p));
      bits = encode_sequence_with_metrics(packed, metrics, mode, c2);
    } else if (!shared_maps.empty()) {
      std::vector<DistortionMetric> metrics;
      metrics.reserve(packed.size());
      for (const auto& map : shared_maps)
        metrics.push_back(metric_from_map(map, c2, n_p));
      bits = encode_sequence_with_metrics(packed, metrics, mode, c2);
    } else {
      bits = encode_sequence(packed, wrapper, mode, c2, opt.frozen);
    }
    auto t1 = std::chrono::steady_clock::now();

    DecodedSequence decoded = decode_sequence(bits.bytes);
    RdPoint pt;
    pt.qp = qp;
    std::uint64_t total = 0;
    for (const FrameRecord& fr : bits.frames) total += fr.total_bits;
    pt.bits_per_frame =
        static_cast<double>(total) / static_cast<double>(bits.frames.size());
    std::vector<FeatureTensor> y_hat;
    y_hat.reserve(y.size());
    for (std::size_t i = 0; i < packed.size(); ++i) {
      const PackedFrame& rec = decoded.frames[i];
      for (std::size_t j = 0; j < rec.data.size(); ++j) {
        double d = rec.data[j] - packed[i].data[j];
        pt.sse_z += d * d;
      }
      y_hat.push_back(restore_forward(wrapper, unpack_tiles(rec)));
      for (std::size_t j = 0; j < y[i].data.size(); ++j) {
        double d = y_hat.back().data[j] - y[i].data[j];
        pt.sse_y += d * d;
      }
    }
    pt.fsnr_y_db = quality_fsnr(y, y_hat);
    pt.encode_ms =
        opt.timing == TimingMode::Wall
            ? std::chrono::duration<double, std::milli>(t1 - t0).count()
            : 0.0;
    curve.points.push_back(pt);
  }
  std::stable_sort(curve.points.begin(), curve.points.end(),
                   [](const RdPoint& a, const RdPoint& b) {
                     return a.bits_per_frame < b.bits_per_frame;
                   });
  return curve;
}

namespace {

struct FitInput {
  std::vector<double> abscissa;  // quality for Rate, log10(rate) for Quality
  std::vector<double> ordinate;
};

FitInput curve_samples(const RdCurve& curve, BdMetric metric) {
  FitInput in;
  for (const RdPoint& p : curve.points) {
    if (!(p.bits_per_frame > 0.0) || !std::isfinite(p.fsnr_y_db)) continue;
    double lr = std::log10(p.bits_per_frame);
    if (metric == BdMetric::Rate) {
      in.abscissa.push_back(p.fsnr_y_db);
      in.ordinate.push_back(lr);
    } else {
      in.abscissa.push_back(lr);
      in.ordinate.push_back(p.fsnr_y_db);
    }
  }
  return in;
}

std::array<double, 4> fit_cubic(const std::vector<double>& t,
                                const std::vector<double>& v) {
  double a[4][5] = {};
  for (std::size_t n = 0; n < t.size(); ++n) {
    double powers[7] = {1, 0, 0, 0, 0, 0, 0};
    for (int k = 1; k <= 6; ++k) powers[k] = powers[k - 1] * t[n];
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) a[i][j] += powers[i + j];
      a[i][4] += powers[i] * v[n];
    }
  }
  for (int col = 0; col < 4; ++col) {
    int pivot = col;
    for (int row = col + 1; row < 4; ++row)
      if (std::abs(a[row][col]) > std::abs(a[pivot][col])) pivot = row;
    if (std::abs(a[pivot][col]) < 1e-12)
      throw InputError("degenerate rd curve, cubic fit is singular");
    if (pivot != col)
      for (int j = 0; j < 5; ++j) std::swap(a[col][j], a[pivot][j]);
    for (int row = col + 1; row < 4; ++row) {
      double f = a[row][col] / a[col][col];
      for (int j = col; j < 5; ++j) a[row][j] -= f * a[col][j];
    }
  }
  std::array<double, 4> coeff{};
  for (int i = 3; i >= 0; --i) {
    double s = a[i][4];
    for (int j = i + 1; j < 4; ++j) s -= a[i][j] * coeff[j];
    coeff[i] = s / a[i][i];
  }
  return coeff;
}

bool fit_monotone(const std::array<double, 4>& c, double t_lo, double t_hi) {
  bool pos = false, neg = false;
  for (int i = 0; i <= 100; ++i) {
    double t = t_lo + (t_hi - t_lo) * i / 100.0;
    double d = c[1] + 2.0 * c[2] * t + 3.0 * c[3] * t * t;
    if (d > 0.0) pos = true;
    if (d < 0.0) neg = true;
  }
  return !(pos && neg);
}

}  // namespace

BdResult bd_delta(const RdCurve& anchor, const RdCurve& test, BdMetric metric) {
  FitInput a_in = curve_samples(anchor, metric);
  FitInput b_in = curve_samples(test, metric);
  if (a_in.abscissa.size() < 4 || b_in.abscissa.size() < 4)
    throw InputError("bd needs at least 4 usable points per curve");

  double lo = std::min(*std::min_element(a_in.abscissa.begin(),
                                         a_in.abscissa.end()),
                       *std::min_element(b_in.abscissa.begin(),
                                         b_in.abscissa.end()));
  double hi = std::max(*std::max_element(a_in.abscissa.begin(),
                                         a_in.abscissa.end()),
                       *std::max_element(b_in.abscissa.begin(),
                                         b_in.abscissa.end()));
  if (!(hi > lo)) throw InputError("degenerate abscissa range");
  double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  auto rescale = [&](std::vector<double>& xs) {
    for (double& x : xs) x = (x - mid) / half;
  };
  double overlap_lo =
      std::max(*std::min_element(a_in.abscissa.begin(), a_in.abscissa.end()),
               *std::min_element(b_in.abscissa.begin(), b_in.abscissa.end()));
  double overlap_hi =
      std::min(*std::max_element(a_in.abscissa.begin(), a_in.abscissa.end()),
               *std::max_element(b_in.abscissa.begin(), b_in.abscissa.end()));
  if (!(overlap_hi > overlap_lo))
    throw InputError("rd curves do not overlap");
  rescale(a_in.abscissa);
  rescale(b_in.abscissa);

  std::array<double, 4> ca = fit_cubic(a_in.abscissa, a_in.ordinate);
  std::array<double, 4> cb = fit_cubic(b_in.abscissa, b_in.ordinate);
  double t_lo = (overlap_lo - mid) / half, t_hi = (overlap_hi - mid) / half;

  std::array<double, 4> diff{};
  for (int k = 0; k < 4; ++k) diff[k] = cb[k] - ca[k];
  double integral = 0.0;
  double p_lo = t_lo, p_hi = t_hi;
  for (int k = 0; k < 4; ++k) {
    integral += diff[k] * (p_hi - p_lo) / (k + 1);
    p_lo *= t_lo;
    p_hi *= t_hi;
  }
  double avg = integral / (t_hi - t_lo);

  BdResult out;
  out.monotone_warning =
      !fit_monotone(ca, t_lo, t_hi) || !fit_monotone(cb, t_lo, t_hi);
  if (metric == BdMetric::Rate)
    out.value = (std::pow(10.0, avg) - 1.0) * 100.0;
  else
    out.value = avg;
  return out;
}

std::vector<HighRateRecord> validate_high_rate(
    const std::vector<FeatureTensor>& y, const WrapperParams& wrapper,
    const std::vector<int>& qps, const EncoderConfig& cfg) {
  if (qps.empty()) throw ConfigError("no qps to validate");
  if (y.empty()) throw InputError("no frames to validate");
  wrapper.validate();

  std::vector<PackedFrame> packed;
  std::vector<FeatureTensor> g2z, eta;
  TilingLayout layout;
  double term_eta = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    FeatureTensor z = reduce_forward(wrapper, y[i]);
    if (i == 0) layout = TilingLayout::square_grid(z.channels, z.height, z.width);
    packed.push_back(pack_tiles(z, layout));
    g2z.push_back(restore_forward(wrapper, z));
    FeatureTensor e(y[i].channels, y[i].height, y[i].width);
    for (std::size_t j = 0; j < e.data.size(); ++j) {
      e.data[j] = y[i].data[j] - g2z.back().data[j];
      term_eta += e.data[j] * e.data[j];
    }
    eta.push_back(std::move(e));
  }

  std::vector<HighRateRecord> records;
  for (int qp : qps) {
    EncoderConfig c2 = cfg;
    c2.base_qp = qp;
    Bitstream bits = encode_sequence(packed, wrapper, RdoMode::SSE, c2);
    DecodedSequence decoded = decode_sequence(bits.bytes);
    double main = 0.0, cross_ip = 0.0;
    for (std::size_t i = 0; i < packed.size(); ++i) {
      FeatureTensor restored =
          restore_forward(wrapper, unpack_tiles(decoded.frames[i]));
      for (std::size_t j = 0; j < restored.data.size(); ++j) {
        double e = restored.data[j] - g2z[i].data[j];
        main += e * e;
        cross_ip += e * eta[i].data[j];
      }
    }
    HighRateRecord rec;
    rec.qp = qp;
    std::uint64_t total = 0;
    for (const FrameRecord& fr : bits.frames) total += fr.total_bits;
    rec.bits_per_frame =
        static_cast<double>(total) / static_cast<double>(bits.frames.size());
    rec.term_main = main;
    rec.term_cross = 2.0 * std::abs(cross_ip);
    rec.term_eta = term_eta;
    rec.ratio = rec.term_cross > 0.0
                    ? main / rec.term_cross
                    : std::numeric_limits<double>::infinity();
    records.push_back(rec);
  }
  return records;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

nlohmann::json point_to_json(const RdPoint& p) {
  return {{"qp", p.qp},
          {"bits_per_frame", p.bits_per_frame},
          {"fsnr_y_db", p.fsnr_y_db},
          {"sse_z", p.sse_z},
          {"sse_y", p.sse_y},
          {"encode_ms", p.encode_ms}};
}

double json_double(const nlohmann::json& v) {
  if (v.is_null()) return std::numeric_limits<double>::infinity();
  return v.get<double>();
}

}  // namespace

void emit_report(const Report& report, const std::string& path,
                 const std::string& format) {
  if (format == "csv") {
    std::string csv =
        "label,mode,qp,bits_per_frame,fsnr_y_db,sse_z,sse_y,encode_ms\n";
    for (const RdCurve& c : report.curves)
      for (const RdPoint& p : c.points)
        csv += c.label + "," + c.mode + "," + std::to_string(p.qp) + "," +
               format_double(p.bits_per_frame) + "," +
               format_double(p.fsnr_y_db) + "," + format_double(p.sse_z) +
               "," + format_double(p.sse_y) + "," +
               format_double(p.encode_ms) + "\n";
    write_text_file(path, csv);
    if (!report.bd.empty()) {
      std::string bd = "anchor,test,bd_rate_pct,bd_quality_db,warning\n";
      for (const BdRow& r : report.bd)
        bd += r.anchor + "," + r.test + "," + format_double(r.bd_rate_pct) +
              "," + format_double(r.bd_quality_db) + "," +
              (r.warning ? "1" : "0") + "\n";
      write_text_file(file_stem_suffix(path, "_bd"), bd);
    }
    if (!report.high_rate.empty()) {
      std::string hr = "qp,bits_per_frame,term_main,term_cross,term_eta,ratio\n";
      for (const HighRateRecord& r : report.high_rate)
        hr += std::to_string(r.qp) + "," + format_double(r.bits_per_frame) +
              "," + format_double(r.term_main) + "," +
              format_double(r.term_cross) + "," + format_double(r.term_eta) +
              "," + format_double(r.ratio) + "\n";
      write_text_file(file_stem_suffix(path, "_hr"), hr);
    }
    return;
  }
  if (format != "json") throw ConfigError("format must be csv or json");
  nlohmann::json doc;
  doc["curves"] = nlohmann::json::array();
  for (const RdCurve& c : report.curves) {
    nlohmann::json jc = {{"label", c.label},
                         {"mode", c.mode},
                         {"points", nlohmann::json::array()}};
    for (const RdPoint& p : c.points) jc["points"].push_back(point_to_json(p));
    doc["curves"].push_back(jc);
  }
  doc["bd"] = nlohmann::json::array();
  for (const BdRow& r : report.bd)
    doc["bd"].push_back({{"anchor", r.anchor},
                         {"test", r.test},
                         {"bd_rate_pct", r.bd_rate_pct},
                         {"bd_quality_db", r.bd_quality_db},
                         {"warning", r.warning}});
  doc["high_rate"] = nlohmann::json::array();
  for (const HighRateRecord& r : report.high_rate)
    doc["high_rate"].push_back({{"qp", r.qp},
                                {"bits_per_frame", r.bits_per_frame},
                                {"term_main", r.term_main},
                                {"term_cross", r.term_cross},
                                {"term_eta", r.term_eta},
                                {"ratio", r.ratio}});
  write_text_file(path, doc.dump(2) + "\n");
}

Report load_report_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid report json: ") + e.what(), 0);
  }
  Report rep;
  try {
    for (const auto& jc : doc.value("curves", nlohmann::json::array())) {
      RdCurve c;
      c.label = jc.value("label", std::string());
      c.mode = jc.value("mode", std::string());
      for (const auto& jp : jc.value("points", nlohmann::json::array())) {
        RdPoint p;
        p.qp = jp.value("qp", 0);
        p.bits_per_frame = json_double(jp.at("bits_per_frame"));
        p.fsnr_y_db = json_double(jp.at("fsnr_y_db"));
        p.sse_z = json_double(jp.value("sse_z", nlohmann::json(0.0)));
        p.sse_y = json_double(jp.value("sse_y", nlohmann::json(0.0)));
        p.encode_ms = json_double(jp.value("encode_ms", nlohmann::json(0.0)));
        c.points.push_back(p);
      }
      rep.curves.push_back(std::move(c));
    }
    for (const auto& jr : doc.value("bd", nlohmann::json::array())) {
      BdRow r;
      r.anchor = jr.value("anchor", std::string());
      r.test = jr.value("test", std::string());
      r.bd_rate_pct = json_double(jr.at("bd_rate_pct"));
      r.bd_quality_db = json_double(jr.at("bd_quality_db"));
      r.warning = jr.value("warning", false);
      rep.bd.push_back(std::move(r));
    }
    for (const auto& jr : doc.value("high_rate", nlohmann::json::array())) {
      HighRateRecord r;
      r.qp = jr.value("qp", 0);
      r.bits_per_frame = json_double(jr.value("bits_per_frame",
                                              nlohmann::json(0.0)));
      r.term_main = json_double(jr.at("term_main"));
      r.term_cross = json_double(jr.at("term_cross"));
      r.term_eta = json_double(jr.at("term_eta"));
      r.ratio = json_double(jr.at("ratio"));
      rep.high_rate.push_back(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report json missing fields: ") + e.what(),
                      0);
  }
  return rep;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw InputError("spearman needs two equal-length series of >= 2");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      double mid = 0.5 * (i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = mid;
      i = j + 1;
    }
    return r;
  };
  std::vector<double> ra = ranks(a), rb = ranks(b);
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= static_cast<double>(ra.size());
  mb /= static_cast<double>(rb.size());
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  if (da == 0.0 || db == 0.0)
    throw InputError("spearman undefined for constant series");
  return num / std::sqrt(da * db);
}

}  // namespace warpco
