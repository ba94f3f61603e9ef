#include "warpco/wrapper.hpp"

#include <cmath>
#include <limits>

#include "warpco/binio.hpp"
#include "warpco/error.hpp"
#include "warpco/rng.hpp"

namespace warpco {

namespace {

void check_finite(const std::vector<float>& v, const char* name) {
  for (float x : v)
    if (!std::isfinite(x))
      throw InputError(std::string("non-finite weight in ") + name);
}

}  // namespace

std::size_t WrapperParams::parameter_count() const {
  return static_cast<std::size_t>(c_red) * c_in + c_red +
         static_cast<std::size_t>(c_mid) * c_red * 9 + c_mid +
         static_cast<std::size_t>(c_in) * c_mid + c_in;
}

void WrapperParams::validate() const {
  if (c_in < 1 || c_red < 1 || c_mid < 1)
    throw ShapeError("wrapper channel counts must be positive");
  if (g1_weight.size() != static_cast<std::size_t>(c_red) * c_in ||
      g1_bias.size() != static_cast<std::size_t>(c_red) ||
      g2_conv3_weight.size() != static_cast<std::size_t>(c_mid) * c_red * 9 ||
      g2_conv3_bias.size() != static_cast<std::size_t>(c_mid) ||
      g2_conv1_weight.size() != static_cast<std::size_t>(c_in) * c_mid ||
      g2_conv1_bias.size() != static_cast<std::size_t>(c_in))
    throw ShapeError("wrapper weight array sizes do not match dimensions");
  check_finite(g1_weight, "g1 weights");
  check_finite(g1_bias, "g1 bias");
  check_finite(g2_conv3_weight, "g2 conv3 weights");
  check_finite(g2_conv3_bias, "g2 conv3 bias");
  check_finite(g2_conv1_weight, "g2 conv1 weights");
  check_finite(g2_conv1_bias, "g2 conv1 bias");
}

FeatureTensor reduce_forward(const WrapperParams& p, const FeatureTensor& y) {
  p.validate();
  if (y.channels != p.c_in)
    throw ShapeError("reduce input has " + std::to_string(y.channels) +
                     " channels, wrapper expects " + std::to_string(p.c_in));
  FeatureTensor z(p.c_red, y.height, y.width);
  const int n = y.height * y.width;
  for (int cr = 0; cr < p.c_red; ++cr) {
    double* out = &z.data[static_cast<std::size_t>(cr) * n];
    for (int i = 0; i < n; ++i) out[i] = p.g1_bias[cr];
    for (int c = 0; c < p.c_in; ++c) {
      double w = p.g1w(cr, c);
      const double* in = &y.data[static_cast<std::size_t>(c) * n];
      for (int i = 0; i < n; ++i) out[i] += w * in[i];
    }
  }
  return z;
}

namespace {

// conv3x3 with zero padding, then bias: pre[m] over the H x W grid.
std::vector<double> conv3_pre(const WrapperParams& p, const FeatureTensor& z) {
  const int h = z.height, w = z.width, n = h * w;
  std::vector<double> pre(static_cast<std::size_t>(p.c_mid) * n);
  for (int m = 0; m < p.c_mid; ++m) {
    double* out = &pre[static_cast<std::size_t>(m) * n];
    for (int i = 0; i < n; ++i) out[i] = p.g2_conv3_bias[m];
    for (int cr = 0; cr < p.c_red; ++cr) {
      const double* in = &z.data[static_cast<std::size_t>(cr) * n];
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          double wgt = p.g2c3(m, cr, ky, kx);
          if (wgt == 0.0) continue;
          for (int y0 = 0; y0 < h; ++y0) {
            int yy = y0 + ky - 1;
            if (yy < 0 || yy >= h) continue;
            for (int x0 = 0; x0 < w; ++x0) {
              int xx = x0 + kx - 1;
              if (xx < 0 || xx >= w) continue;
              out[y0 * w + x0] += wgt * in[yy * w + xx];
            }
          }
        }
    }
  }
  return pre;
}

FeatureTensor conv1_out(const WrapperParams& p, const std::vector<double>& act,
                        int h, int w) {
  const int n = h * w;
  FeatureTensor out(p.c_in, h, w);
  for (int c = 0; c < p.c_in; ++c) {
    double* dst = &out.data[static_cast<std::size_t>(c) * n];
    for (int i = 0; i < n; ++i) dst[i] = p.g2_conv1_bias[c];
    for (int m = 0; m < p.c_mid; ++m) {
      double wgt = p.g2c1(c, m);
      const double* src = &act[static_cast<std::size_t>(m) * n];
      for (int i = 0; i < n; ++i) dst[i] += wgt * src[i];
    }
  }
  return out;
}

}  // namespace

FeatureTensor restore_forward(const WrapperParams& p, const FeatureTensor& z) {
  p.validate();
  if (z.channels != p.c_red)
    throw ShapeError("restore input has " + std::to_string(z.channels) +
                     " channels, wrapper expects " + std::to_string(p.c_red));
  std::vector<double> act = conv3_pre(p, z);
  if (!p.nonlinearity_bypass)
    for (double& v : act) v = std::tanh(v);
  return conv1_out(p, act, z.height, z.width);
}

RestoreLinearization restore_linearize(const WrapperParams& p,
                                       const FeatureTensor& z) {
  p.validate();
  if (z.channels != p.c_red)
    throw ShapeError("linearization input has " + std::to_string(z.channels) +
                     " channels, wrapper expects " + std::to_string(p.c_red));
  RestoreLinearization lin;
  lin.c_red = p.c_red;
  lin.height = z.height;
  lin.width = z.width;
  lin.pre_activation = conv3_pre(p, z);
  return lin;
}

FeatureTensor restore_vjp(const WrapperParams& p,
                          const RestoreLinearization& lin,
                          const FeatureTensor& cotangent) {
  p.validate();
  if (lin.c_red != p.c_red)
    throw ShapeError("linearization does not match wrapper dimensions");
  if (cotangent.channels != p.c_in || cotangent.height != lin.height ||
      cotangent.width != lin.width)
    throw ShapeError("cotangent shape does not match restored output");
  const int h = lin.height, w = lin.width, n = h * w;
  if (lin.pre_activation.size() != static_cast<std::size_t>(p.c_mid) * n)
    throw ShapeError("linearization buffer has the wrong size");

  // Through conv1x1: d_act[m] = sum_c W2[c][m] * v[c].
  std::vector<double> d_act(static_cast<std::size_t>(p.c_mid) * n, 0.0);
  for (int c = 0; c < p.c_in; ++c) {
    const double* v = &cotangent.data[static_cast<std::size_t>(c) * n];
    for (int m = 0; m < p.c_mid; ++m) {
      double wgt = p.g2c1(c, m);
      double* dst = &d_act[static_cast<std::size_t>(m) * n];
      for (int i = 0; i < n; ++i) dst[i] += wgt * v[i];
    }
  }
  // Through the activation: tanh'(u) = 1 - tanh(u)^2.
  if (!p.nonlinearity_bypass)
    for (std::size_t i = 0; i < d_act.size(); ++i) {
      double t = std::tanh(lin.pre_activation[i]);
      d_act[i] *= 1.0 - t * t;
    }
  // Through conv3x3: scatter each pre-activation grad back to z.
  FeatureTensor grad(p.c_red, h, w);
  for (int m = 0; m < p.c_mid; ++m) {
    const double* src = &d_act[static_cast<std::size_t>(m) * n];
    for (int cr = 0; cr < p.c_red; ++cr) {
      double* dst = &grad.data[static_cast<std::size_t>(cr) * n];
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          double wgt = p.g2c3(m, cr, ky, kx);
          if (wgt == 0.0) continue;
          for (int y0 = 0; y0 < h; ++y0) {
            int yy = y0 + ky - 1;
            if (yy < 0 || yy >= h) continue;
            for (int x0 = 0; x0 < w; ++x0) {
              int xx = x0 + kx - 1;
              if (xx < 0 || xx >= w) continue;
              dst[yy * w + xx] += wgt * src[y0 * w + x0];
            }
          }
        }
    }
  }
  return grad;
}

FeatureTensor restore_vjp(const WrapperParams& p, const FeatureTensor& z,
                          const FeatureTensor& cotangent) {
  return restore_vjp(p, restore_linearize(p, z), cotangent);
}

namespace {

// Training-time weights in double precision; rounded to f32 only on return.
struct Master {
  std::vector<double> w1, b1, k3, b3, w2, b2;

  static Master zeros_like(const Master& o) {
    Master m;
    m.w1.assign(o.w1.size(), 0.0);
    m.b1.assign(o.b1.size(), 0.0);
    m.k3.assign(o.k3.size(), 0.0);
    m.b3.assign(o.b3.size(), 0.0);
    m.w2.assign(o.w2.size(), 0.0);
    m.b2.assign(o.b2.size(), 0.0);
    return m;
  }
};

WrapperParams master_to_params(const Master& m, int c_in, int c_red, int c_mid,
                               bool bypass) {
  WrapperParams p;
  p.c_in = c_in;
  p.c_red = c_red;
  p.c_mid = c_mid;
  p.nonlinearity_bypass = bypass;
  auto round_f32 = [](const std::vector<double>& v) {
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      out[i] = static_cast<float>(v[i]);
    return out;
  };
  p.g1_weight = round_f32(m.w1);
  p.g1_bias = round_f32(m.b1);
  p.g2_conv3_weight = round_f32(m.k3);
  p.g2_conv3_bias = round_f32(m.b3);
  p.g2_conv1_weight = round_f32(m.w2);
  p.g2_conv1_bias = round_f32(m.b2);
  return p;
}

// One full-batch pass: per-entry MSE over the whole dataset plus, when grads
// is non-null, its gradient accumulated sample by sample in dataset order.
double batch_pass(const Master& w, const std::vector<FeatureTensor>& data,
                  int c_in, int c_red, int c_mid, bool bypass, Master* grads) {
  const int h = data.front().height, wd = data.front().width, n = h * wd;
  const double inv_total =
      1.0 / (static_cast<double>(data.size()) * c_in * n);
  std::vector<double> z(static_cast<std::size_t>(c_red) * n);
  std::vector<double> pre(static_cast<std::size_t>(c_mid) * n);
  std::vector<double> act(static_cast<std::size_t>(c_mid) * n);
  std::vector<double> err(static_cast<std::size_t>(c_in) * n);
  std::vector<double> d_act(static_cast<std::size_t>(c_mid) * n);
  std::vector<double> d_z(static_cast<std::size_t>(c_red) * n);
  double loss = 0.0;

  for (const FeatureTensor& y : data) {
    // g1: 1x1 conv.
    for (int cr = 0; cr < c_red; ++cr) {
      double* zo = &z[static_cast<std::size_t>(cr) * n];
      for (int i = 0; i < n; ++i) zo[i] = w.b1[cr];
      for (int c = 0; c < c_in; ++c) {
        double wt = w.w1[cr * c_in + c];
        const double* in = &y.data[static_cast<std::size_t>(c) * n];
        for (int i = 0; i < n; ++i) zo[i] += wt * in[i];
      }
    }
    // g2 conv3 + activation.
    for (int m = 0; m < c_mid; ++m) {
      double* po = &pre[static_cast<std::size_t>(m) * n];
      for (int i = 0; i < n; ++i) po[i] = w.b3[m];
      for (int cr = 0; cr < c_red; ++cr) {
        const double* in = &z[static_cast<std::size_t>(cr) * n];
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx) {
            double wt = w.k3[((m * c_red + cr) * 3 + ky) * 3 + kx];
            for (int y0 = 0; y0 < h; ++y0) {
              int yy = y0 + ky - 1;
              if (yy < 0 || yy >= h) continue;
              for (int x0 = 0; x0 < wd; ++x0) {
                int xx = x0 + kx - 1;
                if (xx < 0 || xx >= wd) continue;
                po[y0 * wd + x0] += wt * in[yy * wd + xx];
              }
            }
          }
      }
    }
    if (bypass)
      act = pre;
    else
      for (std::size_t i = 0; i < pre.size(); ++i) act[i] = std::tanh(pre[i]);
    // g2 conv1 and residual.
    for (int c = 0; c < c_in; ++c) {
      double* eo = &err[static_cast<std::size_t>(c) * n];
      const double* in = &y.data[static_cast<std::size_t>(c) * n];
      for (int i = 0; i < n; ++i) eo[i] = w.b2[c] - in[i];
      for (int m = 0; m < c_mid; ++m) {
        double wt = w.w2[c * c_mid + m];
        const double* a = &act[static_cast<std::size_t>(m) * n];
        for (int i = 0; i < n; ++i) eo[i] += wt * a[i];
      }
      for (int i = 0; i < n; ++i) loss += eo[i] * eo[i];
    }
    if (!grads) continue;

    // Backward. d_out = 2 * err * inv_total, folded in at the leaves.
    std::fill(d_act.begin(), d_act.end(), 0.0);
    for (int c = 0; c < c_in; ++c) {
      const double* eo = &err[static_cast<std::size_t>(c) * n];
      double bsum = 0.0;
      for (int m = 0; m < c_mid; ++m) {
        double wt = w.w2[c * c_mid + m];
        const double* a = &act[static_cast<std::size_t>(m) * n];
        double* da = &d_act[static_cast<std::size_t>(m) * n];
        double wsum = 0.0;
        for (int i = 0; i < n; ++i) {
          wsum += eo[i] * a[i];
          da[i] += wt * eo[i];
        }
        grads->w2[c * c_mid + m] += 2.0 * inv_total * wsum;
      }
      for (int i = 0; i < n; ++i) bsum += eo[i];
      grads->b2[c] += 2.0 * inv_total * bsum;
    }
    if (!bypass)
      for (std::size_t i = 0; i < d_act.size(); ++i) {
        double t = act[i];
        d_act[i] *= 1.0 - t * t;
      }
    std::fill(d_z.begin(), d_z.end(), 0.0);
    for (int m = 0; m < c_mid; ++m) {
      const double* dp = &d_act[static_cast<std::size_t>(m) * n];
      double bsum = 0.0;
      for (int i = 0; i < n; ++i) bsum += dp[i];
      grads->b3[m] += 2.0 * inv_total * bsum;
      for (int cr = 0; cr < c_red; ++cr) {
        const double* zi = &z[static_cast<std::size_t>(cr) * n];
        double* dz = &d_z[static_cast<std::size_t>(cr) * n];
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx) {
            double wt = w.k3[((m * c_red + cr) * 3 + ky) * 3 + kx];
            double wsum = 0.0;
            for (int y0 = 0; y0 < h; ++y0) {
              int yy = y0 + ky - 1;
              if (yy < 0 || yy >= h) continue;
              for (int x0 = 0; x0 < wd; ++x0) {
                int xx = x0 + kx - 1;
                if (xx < 0 || xx >= wd) continue;
                wsum += dp[y0 * wd + x0] * zi[yy * wd + xx];
                dz[yy * wd + xx] += wt * dp[y0 * wd + x0];
              }
            }
            grads->k3[((m * c_red + cr) * 3 + ky) * 3 + kx] +=
                2.0 * inv_total * wsum;
          }
      }
    }
    for (int cr = 0; cr < c_red; ++cr) {
      const double* dz = &d_z[static_cast<std::size_t>(cr) * n];
      double bsum = 0.0;
      for (int i = 0; i < n; ++i) bsum += dz[i];
      grads->b1[cr] += 2.0 * inv_total * bsum;
      for (int c = 0; c < c_in; ++c) {
        const double* in = &y.data[static_cast<std::size_t>(c) * n];
        double wsum = 0.0;
        for (int i = 0; i < n; ++i) wsum += dz[i] * in[i];
        grads->w1[cr * c_in + c] += 2.0 * inv_total * wsum;
      }
    }
  }
  return loss * inv_total;
}

}  // namespace

FitResult fit_wrappers(const std::vector<FeatureTensor>& dataset,
                       const FitConfig& cfg) {
  if (dataset.empty()) throw InputError("fit dataset is empty");
  const FeatureTensor& first = dataset.front();
  for (const FeatureTensor& f : dataset)
    if (!f.same_shape(first))
      throw ShapeError("fit dataset has mixed tensor shapes");
  if (cfg.c_red < 1 || cfg.c_mid < 1)
    throw ConfigError("fit channel counts must be positive");
  if (cfg.c_red > first.channels)
    throw ConfigError("reduced channel count exceeds input channels");
  if (!(cfg.learning_rate > 0.0))
    throw ConfigError("learning rate must be positive");
  if (cfg.iterations < 0) throw ConfigError("iteration count must be >= 0");
  if (cfg.checkpoint_interval < 1)
    throw ConfigError("checkpoint interval must be >= 1");

  const int c_in = first.channels, c_red = cfg.c_red, c_mid = cfg.c_mid;
  Master w;
  RngStream s1{cfg.seed, 101, 0};
  RngStream s3{cfg.seed, 102, 0};
  RngStream s2{cfg.seed, 103, 0};
  w.w1 = gaussian_sequence(s1, static_cast<std::size_t>(c_red) * c_in,
                           1.0 / c_in);
  w.b1.assign(c_red, 0.0);
  w.k3 = gaussian_sequence(s3, static_cast<std::size_t>(c_mid) * c_red * 9,
                           1.0 / (c_red * 9.0));
  w.b3.assign(c_mid, 0.0);
  w.w2 = gaussian_sequence(s2, static_cast<std::size_t>(c_in) * c_mid,
                           1.0 / c_mid);
  w.b2.assign(c_in, 0.0);

  FitResult result;
  double best = std::numeric_limits<double>::infinity();
  Master best_w = w;
  for (int it = 0; it <= cfg.iterations; ++it) {
    const bool last = it == cfg.iterations;
    Master grads = Master::zeros_like(w);
    double loss = batch_pass(w, dataset, c_in, c_red, c_mid,
                             cfg.nonlinearity_bypass, last ? nullptr : &grads);
    if (!std::isfinite(loss)) throw TrainingError("loss is non-finite", it);
    if (loss < best) {
      best = loss;
      best_w = w;
      result.best_iteration = it;
    }
    if (it % cfg.checkpoint_interval == 0 || last)
      result.loss_trace.push_back(best);
    if (last) break;
    auto step = [&](std::vector<double>& param, const std::vector<double>& g) {
      for (std::size_t i = 0; i < param.size(); ++i)
        param[i] -= cfg.learning_rate * g[i];
    };
    step(w.w1, grads.w1);
    step(w.b1, grads.b1);
    step(w.k3, grads.k3);
    step(w.b3, grads.b3);
    step(w.w2, grads.w2);
    step(w.b2, grads.b2);
  }
  result.best_loss = best;
  result.params = master_to_params(best_w, c_in, c_red, c_mid,
                                   cfg.nonlinearity_bypass);
  return result;
}

void save_params(const WrapperParams& p, const std::string& path) {
  p.validate();
  ByteWriter w;
  w.magic("WRP1");
  w.u32(static_cast<std::uint32_t>(p.c_in));
  w.u32(static_cast<std::uint32_t>(p.c_red));
  w.u32(static_cast<std::uint32_t>(p.c_mid));
  w.u8(p.nonlinearity_bypass ? 1 : 0);
  w.f32_array(p.g1_weight);
  w.f32_array(p.g1_bias);
  w.f32_array(p.g2_conv3_weight);
  w.f32_array(p.g2_conv3_bias);
  w.f32_array(p.g2_conv1_weight);
  w.f32_array(p.g2_conv1_bias);
  w.to_file(path);
}

WrapperParams load_params(const std::string& path) {
  ByteReader r = ByteReader::from_file(path);
  r.expect_magic("WRP1");
  std::uint64_t dims_at = r.offset();
  WrapperParams p;
  p.c_in = static_cast<int>(r.u32());
  p.c_red = static_cast<int>(r.u32());
  p.c_mid = static_cast<int>(r.u32());
  if (p.c_in < 1 || p.c_red < 1 || p.c_mid < 1 || p.c_in > 4096 ||
      p.c_red > 4096 || p.c_mid > 4096)
    throw FormatError("implausible wrapper dimensions", dims_at);
  std::uint8_t bypass = r.u8();
  if (bypass > 1) throw FormatError("bypass flag must be 0 or 1", dims_at + 12);
  p.nonlinearity_bypass = bypass != 0;
  auto read_array = [&](std::size_t expected, const char* name) {
    std::uint64_t at = r.offset();
    std::vector<float> v = r.f32_array(1u << 26);
    if (v.size() != expected)
      throw FormatError(std::string(name) + " has wrong length", at);
    for (float x : v)
      if (!std::isfinite(x))
        throw FormatError(std::string("non-finite value in ") + name, at);
    return v;
  };
  p.g1_weight = read_array(static_cast<std::size_t>(p.c_red) * p.c_in,
                           "g1 weight array");
  p.g1_bias = read_array(p.c_red, "g1 bias array");
  p.g2_conv3_weight = read_array(
      static_cast<std::size_t>(p.c_mid) * p.c_red * 9, "g2 conv3 weight array");
  p.g2_conv3_bias = read_array(p.c_mid, "g2 conv3 bias array");
  p.g2_conv1_weight = read_array(static_cast<std::size_t>(p.c_in) * p.c_mid,
                                 "g2 conv1 weight array");
  p.g2_conv1_bias = read_array(p.c_in, "g2 conv1 bias array");
  r.expect_end();
  return p;
}

}  // namespace warpco
