#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "warpco/binio.hpp"
#include "warpco/error.hpp"
#include "warpco/rng.hpp"
#include "warpco/tensor.hpp"
#include "warpco/wrapper.hpp"

using namespace warpco;

namespace {

std::vector<float> random_f32(RngStream& s, std::size_t n, double variance) {
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = static_cast<float>(s.next_gaussian(variance));
  return out;
}

WrapperParams random_params(int c_in, int c_red, int c_mid, bool bypass,
                            std::uint64_t seed) {
  WrapperParams p;
  p.c_in = c_in;
  p.c_red = c_red;
  p.c_mid = c_mid;
  p.nonlinearity_bypass = bypass;
  RngStream s{seed, 0, 0};
  p.g1_weight = random_f32(s, static_cast<std::size_t>(c_red) * c_in,
                           1.0 / c_in);
  p.g1_bias = random_f32(s, c_red, 0.01);
  p.g2_conv3_weight = random_f32(
      s, static_cast<std::size_t>(c_mid) * c_red * 9, 1.0 / (c_red * 9));
  p.g2_conv3_bias = random_f32(s, c_mid, 0.01);
  p.g2_conv1_weight = random_f32(s, static_cast<std::size_t>(c_in) * c_mid,
                                 1.0 / c_mid);
  p.g2_conv1_bias = random_f32(s, c_in, 0.01);
  return p;
}

FeatureTensor random_tensor(int c, int h, int w, std::uint64_t seed) {
  FeatureTensor t(c, h, w);
  RngStream s{seed, 1, 0};
  for (double& v : t.data) v = s.next_gaussian(1.0);
  return t;
}

// Straight-line restoration pass written independently of the library:
// explicit zero-padded 3x3 convolution, tanh, 1x1 convolution.
FeatureTensor naive_restore(const WrapperParams& p, const FeatureTensor& z) {
  FeatureTensor mid(p.c_mid, z.height, z.width);
  for (int m = 0; m < p.c_mid; ++m)
    for (int y = 0; y < z.height; ++y)
      for (int x = 0; x < z.width; ++x) {
        double acc = p.g2_conv3_bias[m];
        for (int cr = 0; cr < p.c_red; ++cr)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              int yy = y + ky - 1, xx = x + kx - 1;
              if (yy < 0 || yy >= z.height || xx < 0 || xx >= z.width)
                continue;
              acc += p.g2c3(m, cr, ky, kx) * z.at(cr, yy, xx);
            }
        mid.at(m, y, x) = p.nonlinearity_bypass ? acc : std::tanh(acc);
      }
  FeatureTensor out(p.c_in, z.height, z.width);
  for (int c = 0; c < p.c_in; ++c)
    for (int y = 0; y < z.height; ++y)
      for (int x = 0; x < z.width; ++x) {
        double acc = p.g2_conv1_bias[c];
        for (int m = 0; m < p.c_mid; ++m)
          acc += p.g2c1(c, m) * mid.at(m, y, x);
        out.at(c, y, x) = acc;
      }
  return out;
}

double dot(const FeatureTensor& a, const FeatureTensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) acc += a.data[i] * b.data[i];
  return acc;
}

bool params_equal(const WrapperParams& a, const WrapperParams& b) {
  return a.c_in == b.c_in && a.c_red == b.c_red && a.c_mid == b.c_mid &&
         a.nonlinearity_bypass == b.nonlinearity_bypass &&
         a.g1_weight == b.g1_weight && a.g1_bias == b.g1_bias &&
         a.g2_conv3_weight == b.g2_conv3_weight &&
         a.g2_conv3_bias == b.g2_conv3_bias &&
         a.g2_conv1_weight == b.g2_conv1_weight &&
         a.g2_conv1_bias == b.g2_conv1_bias;
}

}  // namespace

TEST_CASE("reduce_forward identity and bias broadcast") {
  WrapperParams p = random_params(2, 2, 1, true, 3);
  p.g1_weight = {1.0f, 0.0f, 0.0f, 1.0f};
  p.g1_bias = {0.0f, 0.0f};
  FeatureTensor y = random_tensor(2, 4, 5, 1);
  FeatureTensor z = reduce_forward(p, y);
  CHECK(z.data == y.data);

  p.g1_bias = {0.5f, -2.0f};
  FeatureTensor zero(2, 4, 5);
  FeatureTensor b = reduce_forward(p, zero);
  for (int yy = 0; yy < 4; ++yy)
    for (int xx = 0; xx < 5; ++xx) {
      CHECK(b.at(0, yy, xx) == 0.5);
      CHECK(b.at(1, yy, xx) == -2.0);
    }
}

TEST_CASE("reduce_forward hand example") {
  WrapperParams p = random_params(2, 2, 1, true, 3);
  p.g1_weight = {1.0f, 1.0f, 1.0f, -1.0f};
  p.g1_bias = {0.0f, 0.0f};
  FeatureTensor y(2, 1, 1);
  y.at(0, 0, 0) = 1.0;
  y.at(1, 0, 0) = 2.0;
  FeatureTensor z = reduce_forward(p, y);
  CHECK(z.at(0, 0, 0) == 3.0);
  CHECK(z.at(1, 0, 0) == -1.0);
}

TEST_CASE("reduce_forward rejects mismatched channels") {
  WrapperParams p = random_params(4, 2, 3, false, 5);
  FeatureTensor y = random_tensor(3, 4, 4, 2);
  CHECK_THROWS_AS((void)reduce_forward(p, y), ShapeError);
}

TEST_CASE("restore_forward zero wrapper and identity taps") {
  WrapperParams zero = random_params(2, 1, 2, true, 9);
  for (auto vec : {&zero.g1_weight, &zero.g1_bias, &zero.g2_conv3_weight,
                   &zero.g2_conv3_bias, &zero.g2_conv1_weight,
                   &zero.g2_conv1_bias})
    for (float& v : *vec) v = 0.0f;
  FeatureTensor z = random_tensor(1, 3, 3, 4);
  FeatureTensor out = restore_forward(zero, z);
  for (double v : out.data) CHECK(v == 0.0);

  WrapperParams ident = random_params(1, 1, 1, true, 9);
  for (float& v : ident.g2_conv3_weight) v = 0.0f;
  ident.g2_conv3_weight[4] = 1.0f;  // center tap
  ident.g2_conv3_bias = {0.0f};
  ident.g2_conv1_weight = {1.0f};
  ident.g2_conv1_bias = {0.0f};
  FeatureTensor pixel(1, 1, 1);
  pixel.at(0, 0, 0) = 0.75;
  FeatureTensor r = restore_forward(ident, pixel);
  CHECK(r.at(0, 0, 0) == 0.75);
}

TEST_CASE("restore_forward matches the naive convolution oracle") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    bool bypass = seed % 2 == 0;
    WrapperParams p = random_params(3, 2, 4, bypass, seed * 17);
    FeatureTensor z = random_tensor(2, 5, 7, seed * 31);
    FeatureTensor fast = restore_forward(p, z);
    FeatureTensor slow = naive_restore(p, z);
    for (std::size_t i = 0; i < fast.data.size(); ++i)
      CHECK(std::abs(fast.data[i] - slow.data[i]) < 1e-10);
  }
}

TEST_CASE("restore_vjp equals the explicit transpose on a linear toy") {
  WrapperParams p = random_params(1, 1, 2, true, 21);
  FeatureTensor z = random_tensor(1, 2, 2, 22);
  FeatureTensor g0 = restore_forward(p, FeatureTensor(1, 2, 2));

  // Build the 4x4 matrix of the affine map column by column.
  double a[4][4];
  for (int j = 0; j < 4; ++j) {
    FeatureTensor basis(1, 2, 2);
    basis.data[j] = 1.0;
    FeatureTensor col = restore_forward(p, basis);
    for (int i = 0; i < 4; ++i) a[i][j] = col.data[i] - g0.data[i];
  }

  FeatureTensor v = random_tensor(1, 2, 2, 23);
  FeatureTensor got = restore_vjp(p, z, v);
  for (int j = 0; j < 4; ++j) {
    double want = 0.0;
    for (int i = 0; i < 4; ++i) want += a[i][j] * v.data[i];
    CHECK(got.data[j] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("restore_vjp at zero matches the bypass vjp") {
  WrapperParams p = random_params(3, 2, 3, false, 33);
  p.g2_conv3_bias = {0.0f, 0.0f, 0.0f};  // pre-activation is 0 at z = 0
  FeatureTensor z(2, 4, 4);
  FeatureTensor v = random_tensor(3, 4, 4, 34);
  FeatureTensor tanh_vjp = restore_vjp(p, z, v);
  p.nonlinearity_bypass = true;
  FeatureTensor lin_vjp = restore_vjp(p, z, v);
  for (std::size_t i = 0; i < tanh_vjp.data.size(); ++i)
    CHECK(tanh_vjp.data[i] == doctest::Approx(lin_vjp.data[i]).epsilon(1e-12));
}

TEST_CASE("restore_vjp vs central finite differences, 50 seeded cases") {
  const double eps = 1e-4;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    int c_in = 1 + static_cast<int>(seed % 4);
    int c_red = 1 + static_cast<int>(seed % 2);
    int c_mid = 1 + static_cast<int>(seed % 3);
    bool bypass = seed % 5 == 0;
    WrapperParams p = random_params(c_in, c_red, c_mid, bypass, seed * 101);
    FeatureTensor z = random_tensor(c_red, 4, 5, seed * 103);
    FeatureTensor v = random_tensor(c_in, 4, 5, seed * 107);
    FeatureTensor u = random_tensor(c_red, 4, 5, seed * 109);

    FeatureTensor zp = z, zm = z;
    for (std::size_t i = 0; i < z.data.size(); ++i) {
      zp.data[i] += eps * u.data[i];
      zm.data[i] -= eps * u.data[i];
    }
    double numeric =
        (dot(restore_forward(p, zp), v) - dot(restore_forward(p, zm), v)) /
        (2.0 * eps);
    double analytic = dot(restore_vjp(p, z, v), u);
    double rel = std::abs(numeric - analytic) /
                 std::max(std::abs(analytic), 1e-3);
    worst = std::max(worst, rel);
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("restore_vjp is linear in the cotangent") {
  WrapperParams p = random_params(3, 2, 4, false, 55);
  FeatureTensor z = random_tensor(2, 4, 4, 56);
  FeatureTensor v1 = random_tensor(3, 4, 4, 57);
  FeatureTensor v2 = random_tensor(3, 4, 4, 58);
  const double a = 1.75, b = -0.4;
  FeatureTensor mix(3, 4, 4);
  for (std::size_t i = 0; i < mix.data.size(); ++i)
    mix.data[i] = a * v1.data[i] + b * v2.data[i];
  FeatureTensor left = restore_vjp(p, z, mix);
  FeatureTensor r1 = restore_vjp(p, z, v1);
  FeatureTensor r2 = restore_vjp(p, z, v2);
  for (std::size_t i = 0; i < left.data.size(); ++i)
    CHECK(std::abs(left.data[i] - (a * r1.data[i] + b * r2.data[i])) < 1e-10);
}

TEST_CASE("restore shape errors") {
  WrapperParams p = random_params(3, 2, 4, false, 66);
  FeatureTensor wrong = random_tensor(3, 4, 4, 67);
  CHECK_THROWS_AS((void)restore_forward(p, wrong), ShapeError);
  FeatureTensor z = random_tensor(2, 4, 4, 68);
  FeatureTensor bad_v = random_tensor(2, 4, 4, 69);
  CHECK_THROWS_AS((void)restore_vjp(p, z, bad_v), ShapeError);
}

TEST_CASE("bypass makes g2 affine") {
  WrapperParams p = random_params(3, 2, 4, true, 71);
  FeatureTensor z1 = random_tensor(2, 4, 4, 72);
  FeatureTensor z2 = random_tensor(2, 4, 4, 73);
  FeatureTensor zsum(2, 4, 4);
  for (std::size_t i = 0; i < zsum.data.size(); ++i)
    zsum.data[i] = z1.data[i] + z2.data[i];
  FeatureTensor g0 = restore_forward(p, FeatureTensor(2, 4, 4));
  FeatureTensor gs = restore_forward(p, zsum);
  FeatureTensor g1v = restore_forward(p, z1);
  FeatureTensor g2v = restore_forward(p, z2);
  for (std::size_t i = 0; i < gs.data.size(); ++i)
    CHECK(std::abs((gs.data[i] - g0.data[i]) -
                   ((g1v.data[i] - g0.data[i]) +
                    (g2v.data[i] - g0.data[i]))) < 1e-9);
}

TEST_CASE("fit_wrappers drives all-zero data to zero loss") {
  std::vector<FeatureTensor> data(3, FeatureTensor(4, 6, 6));
  FitConfig cfg;
  cfg.c_red = 2;
  cfg.c_mid = 3;
  cfg.iterations = 20;
  FitResult res = fit_wrappers(data, cfg);
  CHECK(res.best_loss < 1e-6);
}

TEST_CASE("fit_wrappers recovers a rank-limited channel subspace") {
  // y lives in a 2d channel subspace; a c_red = 2 bypass wrapper can in
  // principle reach zero error, so anything above 1% of variance means the
  // fit failed.
  const int c = 4, h = 8, w = 8;
  const double mix[4][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
  std::vector<FeatureTensor> data;
  for (int n = 0; n < 6; ++n) {
    FeatureTensor base = random_tensor(2, h, w, 82 + n);
    FeatureTensor y(c, h, w);
    for (int cc = 0; cc < c; ++cc)
      for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx)
          y.at(cc, yy, xx) = mix[cc][0] * base.at(0, yy, xx) +
                             mix[cc][1] * base.at(1, yy, xx);
    data.push_back(std::move(y));
  }
  double var = 0.0, mean = 0.0;
  std::size_t count = 0;
  for (const FeatureTensor& t : data)
    for (double v : t.data) {
      mean += v;
      ++count;
    }
  mean /= static_cast<double>(count);
  for (const FeatureTensor& t : data)
    for (double v : t.data) var += (v - mean) * (v - mean);
  var /= static_cast<double>(count);

  FitConfig cfg;
  cfg.c_red = 2;
  cfg.c_mid = 4;
  cfg.nonlinearity_bypass = true;
  cfg.iterations = 3000;
  cfg.learning_rate = 0.2;
  cfg.seed = 5;
  FitResult res = fit_wrappers(data, cfg);
  CHECK(res.best_loss < 0.01 * var);
}

TEST_CASE("fit_wrappers is deterministic and keeps the trace non-increasing") {
  std::vector<FeatureTensor> data;
  for (int n = 0; n < 4; ++n) data.push_back(random_tensor(4, 6, 6, 90 + n));
  FitConfig cfg;
  cfg.c_red = 2;
  cfg.c_mid = 3;
  cfg.iterations = 60;
  cfg.seed = 11;
  FitResult a = fit_wrappers(data, cfg);
  FitResult b = fit_wrappers(data, cfg);
  CHECK(params_equal(a.params, b.params));
  CHECK(a.loss_trace == b.loss_trace);
  REQUIRE(!a.loss_trace.empty());
  for (std::size_t i = 1; i < a.loss_trace.size(); ++i)
    CHECK(a.loss_trace[i] <= a.loss_trace[i - 1]);
  CHECK(a.best_loss == a.loss_trace.back());
}

TEST_CASE("fit_wrappers input validation and divergence") {
  CHECK_THROWS_AS((void)fit_wrappers({}, FitConfig{}), InputError);

  std::vector<FeatureTensor> mixed = {random_tensor(4, 6, 6, 1),
                                      random_tensor(4, 5, 6, 2)};
  CHECK_THROWS_AS((void)fit_wrappers(mixed, FitConfig{}), ShapeError);

  std::vector<FeatureTensor> data = {random_tensor(2, 6, 6, 3)};
  FitConfig narrow;
  narrow.c_red = 5;  // wider than the input
  CHECK_THROWS_AS((void)fit_wrappers(data, narrow), ConfigError);

  FitConfig wild;
  wild.c_red = 1;
  wild.c_mid = 2;
  wild.learning_rate = 1e9;
  wild.iterations = 50;
  try {
    (void)fit_wrappers(data, wild);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(e.iteration() >= 0);
  }
}

TEST_CASE("square_grid shapes") {
  TilingLayout l4 = TilingLayout::square_grid(4, 8, 8);
  CHECK(l4.rows == 2);
  CHECK(l4.cols == 2);
  CHECK(l4.frame_height() == 16);
  CHECK(l4.frame_width() == 16);

  TilingLayout l3 = TilingLayout::square_grid(3, 8, 8);
  CHECK(l3.rows == 2);
  CHECK(l3.cols == 2);

  TilingLayout l5 = TilingLayout::square_grid(5, 4, 4);
  CHECK(l5.cols == 3);
  CHECK(l5.rows == 2);

  TilingLayout l1 = TilingLayout::square_grid(1, 16, 16);
  CHECK(l1.rows == 1);
  CHECK(l1.cols == 1);
}

TEST_CASE("pack_tiles raster order and padding") {
  FeatureTensor z = random_tensor(4, 8, 8, 44);
  TilingLayout layout = TilingLayout::square_grid(4, 8, 8);
  PackedFrame f = pack_tiles(z, layout);
  REQUIRE(f.height == 16);
  REQUIRE(f.width == 16);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      CHECK(f.at(y, x) == z.at(0, y, x));
      CHECK(f.at(y, 8 + x) == z.at(1, y, x));
      CHECK(f.at(8 + y, x) == z.at(2, y, x));
      CHECK(f.at(8 + y, 8 + x) == z.at(3, y, x));
    }

  FeatureTensor z3 = random_tensor(3, 8, 8, 45);
  PackedFrame f3 = pack_tiles(z3, TilingLayout::square_grid(3, 8, 8));
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) CHECK(f3.at(8 + y, 8 + x) == 0.0);
}

TEST_CASE("unpack_tiles inverts pack_tiles") {
  FeatureTensor z = random_tensor(5, 6, 10, 46);
  TilingLayout layout = TilingLayout::square_grid(5, 6, 10);
  FeatureTensor back = unpack_tiles(pack_tiles(z, layout));
  CHECK(back.channels == z.channels);
  CHECK(back.data == z.data);
}

TEST_CASE("pack_tiles validates the layout") {
  FeatureTensor z = random_tensor(4, 8, 8, 47);
  TilingLayout wrong = TilingLayout::square_grid(4, 8, 4);
  CHECK_THROWS_AS((void)pack_tiles(z, wrong), ShapeError);
  TilingLayout fewer = TilingLayout::square_grid(3, 8, 8);
  CHECK_THROWS_AS((void)pack_tiles(z, fewer), ShapeError);
}

TEST_CASE("wrapper params round trip bit-exactly") {
  WrapperParams p = random_params(5, 3, 4, true, 99);
  const std::string path = "wrapper_roundtrip.wrp";
  save_params(p, path);
  WrapperParams q = load_params(path);
  CHECK(params_equal(p, q));
  std::remove(path.c_str());
}

TEST_CASE("wrapper params file header layout") {
  WrapperParams p = random_params(3, 2, 4, false, 100);
  const std::string path = "wrapper_header.wrp";
  save_params(p, path);
  ByteReader r = ByteReader::from_file(path);
  r.expect_magic("WRP1");
  CHECK(r.u32() == 3);  // C
  CHECK(r.u32() == 2);  // C'
  CHECK(r.u32() == 4);  // C_mid
  CHECK(r.u8() == 0);   // bypass flag
  std::vector<float> g1w = r.f32_array(4096);
  CHECK(g1w == p.g1_weight);
  std::remove(path.c_str());
}

TEST_CASE("wrapper params load failures") {
  WrapperParams p = random_params(3, 2, 4, false, 101);
  const std::string path = "wrapper_bad.wrp";
  save_params(p, path);

  std::vector<std::uint8_t> bytes = read_file_bytes(path);
  std::vector<std::uint8_t> trunc(bytes.begin(), bytes.begin() + 20);
  write_file_bytes(path, trunc);
  CHECK_THROWS_AS((void)load_params(path), FormatError);

  bytes[0] = 'X';
  write_file_bytes(path, bytes);
  try {
    (void)load_params(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("WRP1") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("feature file round trip and header layout") {
  std::vector<FeatureTensor> frames;
  for (int n = 0; n < 3; ++n) {
    FeatureTensor t = random_tensor(2, 4, 5, 110 + n);
    // written as f32; store f32-representable values so equality is exact
    for (double& v : t.data) v = static_cast<float>(v);
    frames.push_back(std::move(t));
  }
  const std::string path = "features_roundtrip.ftn";
  save_features(frames, path);

  ByteReader r = ByteReader::from_file(path);
  r.expect_magic("FTN1");
  CHECK(r.u32() == 2);
  CHECK(r.u32() == 4);
  CHECK(r.u32() == 5);
  CHECK(r.u32() == 3);

  std::vector<FeatureTensor> back = load_features(path);
  REQUIRE(back.size() == 3);
  for (int n = 0; n < 3; ++n) CHECK(back[n].data == frames[n].data);
  std::remove(path.c_str());
}

TEST_CASE("feature file load failures") {
  std::vector<FeatureTensor> frames = {random_tensor(2, 4, 4, 120)};
  const std::string path = "features_bad.ftn";
  save_features(frames, path);
  std::vector<std::uint8_t> bytes = read_file_bytes(path);

  std::vector<std::uint8_t> trunc(bytes.begin(), bytes.end() - 10);
  write_file_bytes(path, trunc);
  CHECK_THROWS_AS((void)load_features(path), FormatError);

  bytes[3] = '9';
  write_file_bytes(path, bytes);
  CHECK_THROWS_AS((void)load_features(path), FormatError);
  std::remove(path.c_str());
}
