#ifndef WARPCO_WRAPPER_HPP_
#define WARPCO_WRAPPER_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "warpco/tensor.hpp"

namespace warpco {

// Wrapper pair: g1 reduces C channels to C' with a 1x1 conv, g2 restores
// with 3x3 conv -> tanh (optional bypass) -> 1x1 conv. Weights are held in
// f32 so file round trips are exact; all arithmetic runs in double.
struct WrapperParams {
  int c_in = 0;
  int c_red = 0;
  int c_mid = 0;
  bool nonlinearity_bypass = false;

  std::vector<float> g1_weight;        // [c_red][c_in]
  std::vector<float> g1_bias;          // [c_red]
  std::vector<float> g2_conv3_weight;  // [c_mid][c_red][3][3]
  std::vector<float> g2_conv3_bias;    // [c_mid]
  std::vector<float> g2_conv1_weight;  // [c_in][c_mid]
  std::vector<float> g2_conv1_bias;    // [c_in]

  double g1w(int cr, int c) const { return g1_weight[cr * c_in + c]; }
  double g2c3(int m, int cr, int ky, int kx) const {
    return g2_conv3_weight[((m * c_red + cr) * 3 + ky) * 3 + kx];
  }
  double g2c1(int c, int m) const { return g2_conv1_weight[c * c_mid + m]; }

  std::size_t parameter_count() const;
  void validate() const;
};

FeatureTensor reduce_forward(const WrapperParams& p, const FeatureTensor& y);
FeatureTensor restore_forward(const WrapperParams& p, const FeatureTensor& z);

// Saved intermediates from a restore pass, enough to replay the backward
// product repeatedly at one linearization point.
struct RestoreLinearization {
  int c_red = 0;
  int height = 0;
  int width = 0;
  std::vector<double> pre_activation;  // [c_mid][H][W]
};

RestoreLinearization restore_linearize(const WrapperParams& p,
                                       const FeatureTensor& z);

// J_g2(z)^T v: cotangent on the restored output pulled back to z space.
FeatureTensor restore_vjp(const WrapperParams& p,
                          const RestoreLinearization& lin,
                          const FeatureTensor& cotangent);
FeatureTensor restore_vjp(const WrapperParams& p, const FeatureTensor& z,
                          const FeatureTensor& cotangent);

struct FitConfig {
  int c_red = 4;
  int c_mid = 8;
  double learning_rate = 0.05;
  int iterations = 400;
  int checkpoint_interval = 10;
  std::uint64_t seed = 1;
  bool nonlinearity_bypass = false;
};

struct FitResult {
  WrapperParams params;
  std::vector<double> loss_trace;  // best loss so far at each checkpoint
  double best_loss = 0.0;
  int best_iteration = -1;
};

// Full-batch gradient descent on the mean per-entry squared restoration
// error, returning the best iterate seen. Throws TrainingError with the
// iteration index if the loss turns non-finite.
FitResult fit_wrappers(const std::vector<FeatureTensor>& dataset,
                       const FitConfig& cfg);

void save_params(const WrapperParams& p, const std::string& path);
WrapperParams load_params(const std::string& path);

}  // namespace warpco

#endif  // WARPCO_WRAPPER_HPP_
