#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "omiga/rng.hpp"

namespace omiga {

/// One dense layer, weights row-major [out][in].
struct Layer {
  int in = 0;
  int out = 0;
  std::vector<double> w;
  std::vector<double> b;
};

/// Plain-value MLP parameters. Hidden layers are rectified-linear, the output
/// layer is identity. All arithmetic is double precision.
struct MlpParams {
  std::vector<Layer> layers;

  int input_dim() const { return layers.empty() ? 0 : layers.front().in; }
  int output_dim() const { return layers.empty() ? 0 : layers.back().out; }
  std::size_t param_count() const;

  /// Shapes must chain and every entry must be finite.
  void validate() const;
};

/// dims = {input, hidden..., output}. All parameters zero.
MlpParams mlp_zeros(const std::vector<int>& dims);

/// Seeded init, uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer.
MlpParams mlp_init(const std::vector<int>& dims, Rng& rng);

/// Forward intermediates for one input; enough to replay an exact backward
/// pass for any upstream vector.
struct GradTape {
  std::vector<std::vector<double>> inputs;   // input to each layer
  std::vector<std::vector<double>> preacts;  // W x + b of each layer
};

/// Gradient accumulator shaped like MlpParams.
struct MlpGrads {
  std::vector<Layer> layers;

  static MlpGrads zeros_like(const MlpParams& p);
  void zero();
  void scale(double s);
  bool finite() const;
};

/// Evaluate the net. If tape is given it is filled for a later backward pass.
std::vector<double> mlp_forward(const MlpParams& p, std::span<const double> input,
                                GradTape* tape = nullptr);

/// Accumulate d(upstream . output)/d(params) into grads. If input_grad is
/// non-null, also accumulates the gradient w.r.t. the input vector.
void mlp_backward_accum(const MlpParams& p, const GradTape& tape,
                        std::span<const double> upstream, MlpGrads& grads,
                        std::vector<double>* input_grad = nullptr);

MlpGrads mlp_backward(const MlpParams& p, const GradTape& tape,
                      std::span<const double> upstream);

/// Bias-corrected Adam. beta1=0.9, beta2=0.999, eps=1e-8.
struct AdamState {
  MlpGrads m;
  MlpGrads v;
  long step = 0;
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState create(const MlpParams& p, double lr);
};

/// In-place update; throws NumericError on non-finite gradients without
/// touching the parameters.
void adam_step(MlpParams& p, const MlpGrads& grads, AdamState& state);

/// target <- (1 - tau) * target + tau * online, elementwise.
void soft_update(MlpParams& target, const MlpParams& online, double tau);

}  // namespace omiga
