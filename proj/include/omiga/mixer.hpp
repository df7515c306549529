#pragma once

#include <span>
#include <vector>

#include "omiga/env.hpp"
#include "omiga/mlp.hpp"

namespace omiga {

/// What the weight network sees: the concatenated joint observation, or each
/// agent's own observation (the local-information ablation).
enum class WeightInput { joint, local };

/// Shared-weight linear value mixer: Q_tot = sum_i w_i * Q_i + b and
/// V_tot = sum_i w_i * V_i + b with the same (w, b). Non-negativity of w is
/// enforced by taking the absolute value of the raw network outputs.
struct MixerParams {
  MlpParams w_net;  // joint: n*obs_dim -> n; local: obs_dim -> n
  MlpParams b_net;  // n*obs_dim -> 1
  WeightInput mode = WeightInput::joint;
  int n_agents = 0;
  int obs_dim = 0;
};

MixerParams mixer_init(int n_agents, int obs_dim, const std::vector<int>& hidden,
                       WeightInput mode, Rng& rng);

/// One evaluation of (w, b) on a joint observation, with tapes when gradients
/// are needed. w[i] = |raw[i]| >= 0.
struct MixerEval {
  std::vector<double> w;
  std::vector<double> raw;
  double b = 0.0;
  std::vector<GradTape> w_tapes;  // joint mode: 1 tape; local mode: n tapes
  GradTape b_tape;
  bool has_tape = false;
};

MixerEval mixer_weights(const MixerParams& p, const JointObs& obs, bool with_tape = false);

double mix_q(std::span<const double> w, double b, std::span<const double> local_qs);
double mix_v(std::span<const double> w, double b, std::span<const double> local_vs);

/// Accumulate gradients given dL/dw (post-abs) and dL/db. The |.| transform
/// routes sign(raw) into the weight-network upstream.
void mixer_backward(const MixerParams& p, const MixerEval& eval, std::span<const double> dw,
                    double db, MlpGrads& w_grads, MlpGrads& b_grads);

std::vector<double> concat_obs(const JointObs& obs);

}  // namespace omiga
