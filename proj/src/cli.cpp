#include "warpco/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "warpco/binio.hpp"
#include "warpco/codec.hpp"
#include "warpco/error.hpp"
#include "warpco/harness.hpp"
#include "warpco/importance.hpp"
#include "warpco/tensor.hpp"
#include "warpco/wrapper.hpp"

namespace warpco {
namespace {

struct ToolConfig {
  SynthConfig synth;
  FitConfig fit;
  EncoderConfig encoder;
};

void check_keys(const nlohmann::json& obj,
                std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) known = true;
    if (!known)
      throw ConfigError("unknown config key '" + it.key() + "' in " + where);
  }
}

NormalizationRule rule_from_name(const std::string& name) {
  if (name == "paper_l2") return NormalizationRule::PaperL2;
  if (name == "mean_l1") return NormalizationRule::MeanL1;
  throw ConfigError("unknown normalization rule '" + name + "'");
}

void load_config(const std::string& path, ToolConfig& tc) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config root must be an object");
  try {
    check_keys(doc, {"synth", "fit", "encoder", "sketch"}, "config root");
    if (doc.contains("synth")) {
      const auto& s = doc["synth"];
      check_keys(s,
                 {"seed", "channels", "height", "width", "frame_count",
                  "blur_radius", "rho", "sigma_decay", "channel_sigma"},
                 "synth");
      if (s.contains("seed")) tc.synth.seed = s["seed"].get<std::uint64_t>();
      if (s.contains("channels")) tc.synth.channels = s["channels"].get<int>();
      if (s.contains("height")) tc.synth.height = s["height"].get<int>();
      if (s.contains("width")) tc.synth.width = s["width"].get<int>();
      if (s.contains("frame_count"))
        tc.synth.frame_count = s["frame_count"].get<int>();
      if (s.contains("blur_radius"))
        tc.synth.blur_radius = s["blur_radius"].get<int>();
      if (s.contains("rho")) tc.synth.rho = s["rho"].get<double>();
      if (s.contains("sigma_decay"))
        tc.synth.sigma_decay = s["sigma_decay"].get<double>();
      if (s.contains("channel_sigma"))
        tc.synth.channel_sigma = s["channel_sigma"].get<std::vector<double>>();
    }
    if (doc.contains("fit")) {
      const auto& f = doc["fit"];
      check_keys(f,
                 {"seed", "c_red", "c_mid", "learning_rate", "iterations",
                  "checkpoint_interval", "nonlinearity_bypass"},
                 "fit");
      if (f.contains("seed")) tc.fit.seed = f["seed"].get<std::uint64_t>();
      if (f.contains("c_red")) tc.fit.c_red = f["c_red"].get<int>();
      if (f.contains("c_mid")) tc.fit.c_mid = f["c_mid"].get<int>();
      if (f.contains("learning_rate"))
        tc.fit.learning_rate = f["learning_rate"].get<double>();
      if (f.contains("iterations"))
        tc.fit.iterations = f["iterations"].get<int>();
      if (f.contains("checkpoint_interval"))
        tc.fit.checkpoint_interval = f["checkpoint_interval"].get<int>();
      if (f.contains("nonlinearity_bypass"))
        tc.fit.nonlinearity_bypass = f["nonlinearity_bypass"].get<bool>();
    }
    if (doc.contains("encoder")) {
      const auto& e = doc["encoder"];
      check_keys(e,
                 {"base_qp", "qp_offset_candidates", "gop_length",
                  "search_range", "lambda_c", "allow_split", "alpha", "rule",
                  "record_candidates"},
                 "encoder");
      if (e.contains("base_qp")) tc.encoder.base_qp = e["base_qp"].get<int>();
      if (e.contains("qp_offset_candidates"))
        tc.encoder.qp_offset_candidates =
            e["qp_offset_candidates"].get<std::vector<int>>();
      if (e.contains("gop_length"))
        tc.encoder.gop.length = e["gop_length"].get<int>();
      if (e.contains("search_range"))
        tc.encoder.search_range = e["search_range"].get<int>();
      if (e.contains("lambda_c"))
        tc.encoder.lambda_c = e["lambda_c"].get<double>();
      if (e.contains("allow_split"))
        tc.encoder.allow_split = e["allow_split"].get<bool>();
      if (e.contains("alpha")) tc.encoder.alpha = e["alpha"].get<double>();
      if (e.contains("rule"))
        tc.encoder.rule = rule_from_name(e["rule"].get<std::string>());
      if (e.contains("record_candidates"))
        tc.encoder.record_candidates = e["record_candidates"].get<bool>();
    }
    if (doc.contains("sketch")) {
      const auto& s = doc["sketch"];
      check_keys(s, {"n_s", "seed"}, "sketch");
      if (s.contains("n_s")) tc.encoder.sketch.n_s = s["n_s"].get<int>();
      if (s.contains("seed"))
        tc.encoder.sketch.seed = s["seed"].get<std::uint64_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

std::vector<PackedFrame> reduce_and_pack(const WrapperParams& wp,
                                         const std::vector<FeatureTensor>& y) {
  std::vector<PackedFrame> packed;
  packed.reserve(y.size());
  TilingLayout layout;
  for (std::size_t i = 0; i < y.size(); ++i) {
    FeatureTensor z = reduce_forward(wp, y[i]);
    if (i == 0)
      layout = TilingLayout::square_grid(z.channels, z.height, z.width);
    packed.push_back(pack_tiles(z, layout));
  }
  return packed;
}

struct GenArgs {
  std::uint64_t seed = 0;
  std::string out, config;
  std::optional<int> channels, height, width, frames;
};

struct FitArgs {
  std::string in, out, config;
  std::uint64_t seed = 0;
  std::optional<int> c_red, c_mid, iterations;
  std::optional<double> lr;
  bool bypass = false;
};

struct MapArgs {
  std::string in, params, out, config;
  std::uint64_t seed = 0;
  int frame = 0;
  std::optional<int> ns;
};

struct FreezeArgs {
  std::string params, out, config;
  std::uint64_t seed = 0;
  std::optional<int> count, ns;
};

struct EncodeArgs {
  std::string in, params, out, map, mode = "sse", config;
  std::optional<int> qp, gop;
  std::optional<std::uint64_t> seed;
};

struct DecodeArgs {
  std::string in, out;
};

struct SweepArgs {
  std::string in, params, out, map, config;
  std::vector<std::string> modes = {"sse"};
  std::vector<int> qps;
  std::string format = "csv", timing = "wall";
  std::optional<std::uint64_t> seed;
  std::optional<int> ns;
  bool share_maps = false;
};

struct BdArgs {
  std::string anchor, test, anchor_label, test_label, out;
  std::string format = "json";
};

struct ValidateArgs {
  std::string in, params, out, config;
  std::vector<int> qps;
  std::string format = "csv";
};

int run_gen(const GenArgs& a) {
  ToolConfig tc;
  if (!a.config.empty()) load_config(a.config, tc);
  tc.synth.seed = a.seed;
  if (a.channels) tc.synth.channels = *a.channels;
  if (a.height) tc.synth.height = *a.height;
  if (a.width) tc.synth.width = *a.width;
  if (a.frames) tc.synth.frame_count = *a.frames;
  std::vector<FeatureTensor> seq = gen_synthetic_sequence(tc.synth);
  save_features(seq, a.out);
  std::cout << "wrote " << seq.size() << " frames (" << tc.synth.channels
            << "x" << tc.synth.height << "x" << tc.synth.width << ") to "
            << a.out << "\n";
  return 0;
}

int run_fit(const FitArgs& a) {
  ToolConfig tc;
  if (!a.config.empty()) load_config(a.config, tc);
  tc.fit.seed = a.seed;
  if (a.c_red) tc.fit.c_red = *a.c_red;
  if (a.c_mid) tc.fit.c_mid = *a.c_mid;
  if (a.iterations) tc.fit.iterations = *a.iterations;
  if (a.lr) tc.fit.learning_rate = *a.lr;
  if (a.bypass) tc.fit.nonlinearity_bypass = true;
  std::vector<FeatureTensor> data = load_features(a.in);
  FitResult res = fit_wrappers(data, tc.fit);
  save_params(res.params, a.out);
  std::cout << "fit " << res.params.c_in << "->" << res.params.c_red
            << " wrapper, best loss " << format_double(res.best_loss)
            << " at iteration " << res.best_iteration << "\n";
  return 0;
}

int run_map(const MapArgs& a) {
  ToolConfig tc;
  if (!a.config.empty()) load_config(a.config, tc);
  std::vector<FeatureTensor> data = load_features(a.in);
  if (a.frame < 0 || static_cast<std::size_t>(a.frame) >= data.size())
    throw InputError("frame index out of range");
  WrapperParams wp = load_params(a.params);
  FeatureTensor z = reduce_forward(wp, data[a.frame]);
  PackedFrame packed = pack_tiles(
      z, TilingLayout::square_grid(z.channels, z.height, z.width));
  SketchSpec spec = tc.encoder.sketch;
  spec.seed = a.seed;
  if (a.ns) spec.n_s = *a.ns;
  ImportanceMap map = compute_map(wp, packed, spec, a.frame);
  save_map(map, a.out);
  std::cout << "wrote map (" << map.weights.size() << " weights, n_s "
            << map.n_s << ") to " << a.out << "\n";
  return 0;
}

int run_freeze(const FreezeArgs& a) {
  ToolConfig tc;
  tc.synth.rho = 0.0;
  tc.synth.frame_count = 64;
  if (!a.config.empty()) load_config(a.config, tc);
  WrapperParams wp = load_params(a.params);
  tc.synth.seed = a.seed;
  tc.synth.channels = wp.c_in;
  if (a.count) tc.synth.frame_count = *a.count;
  SketchSpec spec = tc.encoder.sketch;
  spec.seed = a.seed;
  if (a.ns) spec.n_s = *a.ns;
  std::vector<FeatureTensor> corpus = gen_synthetic_sequence(tc.synth);
  std::vector<ImportanceMap> maps;
  maps.reserve(corpus.size());
  TilingLayout layout;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    FeatureTensor z = reduce_forward(wp, corpus[i]);
    if (i == 0)
      layout = TilingLayout::square_grid(z.channels, z.height, z.width);
    maps.push_back(compute_map(wp, pack_tiles(z, layout), spec, 0));
  }
  ImportanceMap frozen = average_maps(maps);
  save_map(frozen, a.out);
  std::cout << "froze " << maps.size() << " maps into " << a.out << "\n";
  return 0;
}

int run_encode(const EncodeArgs& a) {
  RdoMode mode = mode_from_name(a.mode);
  if ((mode == RdoMode::WA || mode == RdoMode::IWA) && !a.seed)
    throw CLI::RequiredError("--seed (sketch randomness in wa/iwa modes)");
  if (mode == RdoMode::FWA && a.map.empty())
    throw CLI::RequiredError("--map (frozen importance map for fwa)");
  ToolConfig tc;
  if (!a.config.empty()) load_config(a.config, tc);
  if (a.qp) tc.encoder.base_qp = *a.qp;
  if (a.gop) tc.encoder.gop.length = *a.gop;
  if (a.seed) tc.encoder.sketch.seed = *a.seed;
  WrapperParams wp = load_params(a.params);
  std::vector<FeatureTensor> data = load_features(a.in);
  std::shared_ptr<const ImportanceMap> frozen;
  if (!a.map.empty())
    frozen = std::make_shared<const ImportanceMap>(load_map(a.map));
  Bitstream bits = encode_sequence(reduce_and_pack(wp, data), wp, mode,
                                   tc.encoder, frozen);
  write_file_bytes(a.out, bits.bytes);
  std::uint64_t total = 0;
  for (const FrameRecord& fr : bits.frames) total += fr.total_bits;
  std::cout << "encoded " << bits.frames.size() << " frames, "
            << bits.bytes.size() << " bytes ("
            << format_double(static_cast<double>(total) /
                             static_cast<double>(bits.frames.size()))
            << " bits/frame) to " << a.out << "\n";
  return 0;
}

int run_decode(const DecodeArgs& a) {
  DecodedSequence dec = decode_sequence(read_file_bytes(a.in));
  std::vector<FeatureTensor> feats;
  feats.reserve(dec.frames.size());
  for (const PackedFrame& f : dec.frames) feats.push_back(unpack_tiles(f));
  save_features(feats, a.out);
  std::cout << "decoded " << feats.size() << " frames ("
            << dec.header.c_red << "x" << dec.header.height << "x"
            << dec.header.width << ") to " << a.out << "\n";
  return 0;
}

int run_sweep(const SweepArgs& a) {
  std::vector<RdoMode> modes;
  bool needs_seed = false, needs_map = false;
  for (const std::string& m : a.modes) {
    RdoMode mode = mode_from_name(m);
    needs_seed |= mode == RdoMode::WA || mode == RdoMode::IWA;
    needs_map |= mode == RdoMode::FWA;
    modes.push_back(mode);
  }
  if (needs_seed && !a.seed)
    throw CLI::RequiredError("--seed (sketch randomness in wa/iwa modes)");
  if (needs_map && a.map.empty())
    throw CLI::RequiredError("--map (frozen importance map for fwa)");
  ToolConfig tc;
  if (!a.config.empty()) load_config(a.config, tc);
  if (a.seed) tc.encoder.sketch.seed = *a.seed;
  if (a.ns) tc.encoder.sketch.n_s = *a.ns;
  WrapperParams wp = load_params(a.params);
  std::vector<FeatureTensor> data = load_features(a.in);
  std::shared_ptr<const ImportanceMap> frozen;
  if (!a.map.empty())
    frozen = std::make_shared<const ImportanceMap>(load_map(a.map));
  Report rep;
  for (RdoMode mode : modes) {
    SweepOptions opt;
    opt.qps = a.qps;
    opt.timing = a.timing == "wall" ? TimingMode::Wall : TimingMode::None;
    opt.share_maps_across_qps = a.share_maps;
    if (mode == RdoMode::FWA) opt.frozen = frozen;
    rep.curves.push_back(sweep(data, wp, mode, tc.encoder, opt));
  }
  emit_report(rep, a.out, a.format);
  std::cout << "swept " << modes.size() << " mode(s) x " << a.qps.size()
            << " qp(s), report at " << a.out << "\n";
  return 0;
}

const RdCurve& pick_curve(const Report& rep, const std::string& label,
                          const std::string& which) {
  if (rep.curves.empty())
    throw InputError(which + " report contains no curves");
  if (label.empty()) return rep.curves.front();
  for (const RdCurve& c : rep.curves)
    if (c.label == label) return c;
  throw InputError(which + " report has no curve labeled '" + label + "'");
}

int run_bd(const BdArgs& a) {
  Report anchor_rep = load_report_json(a.anchor);
  Report test_rep = load_report_json(a.test);
  const RdCurve& anchor = pick_curve(anchor_rep, a.anchor_label, "anchor");
  const RdCurve& test = pick_curve(test_rep, a.test_label, "test");
  BdResult rate = bd_delta(anchor, test, BdMetric::Rate);
  BdResult qual = bd_delta(anchor, test, BdMetric::Quality);
  std::printf("BD-rate %.2f%%\n", rate.value);
  std::printf("BD-quality %.2f dB\n", qual.value);
  if (rate.monotone_warning || qual.monotone_warning)
    std::cerr << "warning: non-monotone rd fit\n";
  if (!a.out.empty()) {
    Report rep;
    BdRow row;
    row.anchor = anchor.label;
    row.test = test.label;
    row.bd_rate_pct = rate.value;
    row.bd_quality_db = qual.value;
    row.warning = rate.monotone_warning || qual.monotone_warning;
    rep.bd.push_back(row);
    emit_report(rep, a.out, a.format);
  }
  return 0;
}

int run_validate(const ValidateArgs& a) {
  ToolConfig tc;
  if (!a.config.empty()) load_config(a.config, tc);
  WrapperParams wp = load_params(a.params);
  std::vector<FeatureTensor> data = load_features(a.in);
  std::vector<HighRateRecord> records =
      validate_high_rate(data, wp, a.qps, tc.encoder);
  for (const HighRateRecord& r : records)
    std::cout << "qp " << r.qp << ": main/cross ratio "
              << format_double(r.ratio) << "\n";
  if (records.size() >= 2) {
    std::vector<double> rates, ratios;
    bool finite = true;
    for (const HighRateRecord& r : records) {
      rates.push_back(r.bits_per_frame);
      ratios.push_back(r.ratio);
      finite &= std::isfinite(r.ratio);
    }
    if (finite)
      std::cout << "spearman(ratio, rate) "
                << format_double(spearman(ratios, rates)) << "\n";
  }
  if (!a.out.empty()) {
    Report rep;
    rep.high_rate = records;
    emit_report(rep, a.out, a.format);
  }
  return 0;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv) {
  CLI::App app{"sandwich feature codec: wrapper fitting, importance maps, "
               "encoding, and rd evaluation"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  GenArgs gen_a;
  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic sequence");
  gen->add_option("--seed", gen_a.seed, "rng seed")->required();
  gen->add_option("--out", gen_a.out, "output features path")->required();
  gen->add_option("--config", gen_a.config, "json config path");
  gen->add_option("--channels", gen_a.channels, "channel count");
  gen->add_option("--height", gen_a.height, "tensor height");
  gen->add_option("--width", gen_a.width, "tensor width");
  gen->add_option("--frames", gen_a.frames, "frame count");

  FitArgs fit_a;
  CLI::App* fit = app.add_subcommand("fit", "fit wrapper parameters");
  fit->add_option("--in", fit_a.in, "training features path")->required();
  fit->add_option("--out", fit_a.out, "output parameters path")->required();
  fit->add_option("--seed", fit_a.seed, "init seed")->required();
  fit->add_option("--config", fit_a.config, "json config path");
  fit->add_option("--c-red", fit_a.c_red, "reduced channel count");
  fit->add_option("--c-mid", fit_a.c_mid, "hidden channel count");
  fit->add_option("--iterations", fit_a.iterations, "gd iterations");
  fit->add_option("--lr", fit_a.lr, "learning rate");
  fit->add_flag("--bypass", fit_a.bypass, "skip the tanh nonlinearity");

  MapArgs map_a;
  CLI::App* map = app.add_subcommand("map", "compute an importance map");
  map->add_option("--in", map_a.in, "features path")->required();
  map->add_option("--params", map_a.params, "wrapper parameters path")
      ->required();
  map->add_option("--out", map_a.out, "output map path")->required();
  map->add_option("--seed", map_a.seed, "sketch seed")->required();
  map->add_option("--frame", map_a.frame, "frame index");
  map->add_option("--ns", map_a.ns, "sketch rows");
  map->add_option("--config", map_a.config, "json config path");

  FreezeArgs freeze_a;
  CLI::App* freeze =
      app.add_subcommand("freeze", "average maps over a synthetic corpus");
  freeze->add_option("--params", freeze_a.params, "wrapper parameters path")
      ->required();
  freeze->add_option("--out", freeze_a.out, "output map path")->required();
  freeze->add_option("--seed", freeze_a.seed, "corpus and sketch seed")
      ->required();
  freeze->add_option("--count", freeze_a.count, "corpus size");
  freeze->add_option("--ns", freeze_a.ns, "sketch rows");
  freeze->add_option("--config", freeze_a.config, "json config path");

  EncodeArgs enc_a;
  CLI::App* enc = app.add_subcommand("encode", "encode a feature sequence");
  enc->add_option("--in", enc_a.in, "features path")->required();
  enc->add_option("--params", enc_a.params, "wrapper parameters path")
      ->required();
  enc->add_option("--out", enc_a.out, "output bitstream path")->required();
  enc->add_option("--mode", enc_a.mode, "rdo mode")
      ->check(CLI::IsMember({"sse", "wa", "iwa", "fwa"}));
  enc->add_option("--qp", enc_a.qp, "base qp");
  enc->add_option("--gop", enc_a.gop, "gop length");
  enc->add_option("--map", enc_a.map, "frozen map path (fwa)");
  enc->add_option("--seed", enc_a.seed, "sketch seed (wa/iwa)");
  enc->add_option("--config", enc_a.config, "json config path");

  DecodeArgs dec_a;
  CLI::App* dec = app.add_subcommand("decode", "decode a bitstream");
  dec->add_option("--in", dec_a.in, "bitstream path")->required();
  dec->add_option("--out", dec_a.out, "output features path")->required();

  SweepArgs sweep_a;
  CLI::App* swp = app.add_subcommand("sweep", "rd sweep over qps and modes");
  swp->add_option("--in", sweep_a.in, "features path")->required();
  swp->add_option("--params", sweep_a.params, "wrapper parameters path")
      ->required();
  swp->add_option("--out", sweep_a.out, "report path")->required();
  swp->add_option("--qps", sweep_a.qps, "comma-separated qp list")
      ->required()
      ->delimiter(',');
  swp->add_option("--mode", sweep_a.modes, "comma-separated rdo modes")
      ->delimiter(',')
      ->check(CLI::IsMember({"sse", "wa", "iwa", "fwa"}));
  swp->add_option("--map", sweep_a.map, "frozen map path (fwa)");
  swp->add_option("--seed", sweep_a.seed, "sketch seed (wa/iwa)");
  swp->add_option("--ns", sweep_a.ns, "sketch rows");
  swp->add_option("--format", sweep_a.format, "report format")
      ->check(CLI::IsMember({"csv", "json"}));
  swp->add_option("--timing", sweep_a.timing, "encode_ms column source")
      ->check(CLI::IsMember({"wall", "none"}));
  swp->add_flag("--share-maps", sweep_a.share_maps,
                "reuse importance maps across qps");
  swp->add_option("--config", sweep_a.config, "json config path");

  BdArgs bd_a;
  CLI::App* bd = app.add_subcommand("bd", "bjontegaard deltas between curves");
  bd->add_option("--anchor", bd_a.anchor, "anchor report json")->required();
  bd->add_option("--test", bd_a.test, "test report json")->required();
  bd->add_option("--anchor-label", bd_a.anchor_label,
                 "curve label in the anchor report (default: first)");
  bd->add_option("--test-label", bd_a.test_label,
                 "curve label in the test report (default: first)");
  bd->add_option("--out", bd_a.out, "optional report path");
  bd->add_option("--format", bd_a.format, "report format")
      ->check(CLI::IsMember({"csv", "json"}));

  ValidateArgs val_a;
  CLI::App* val =
      app.add_subcommand("validate", "high-rate assumption check");
  val->add_option("--in", val_a.in, "features path")->required();
  val->add_option("--params", val_a.params, "wrapper parameters path")
      ->required();
  val->add_option("--qps", val_a.qps, "comma-separated qp list")
      ->required()
      ->delimiter(',');
  val->add_option("--out", val_a.out, "optional report path");
  val->add_option("--format", val_a.format, "report format")
      ->check(CLI::IsMember({"csv", "json"}));
  val->add_option("--config", val_a.config, "json config path");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return run_gen(gen_a);
    if (fit->parsed()) return run_fit(fit_a);
    if (map->parsed()) return run_map(map_a);
    if (freeze->parsed()) return run_freeze(freeze_a);
    if (enc->parsed()) return run_encode(enc_a);
    if (dec->parsed()) return run_decode(dec_a);
    if (swp->parsed()) return run_sweep(sweep_a);
    if (bd->parsed()) return run_bd(bd_a);
    if (val->parsed()) return run_validate(val_a);
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace warpco
