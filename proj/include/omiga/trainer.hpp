#pragma once

#include <string>
#include <vector>

#include "omiga/dataset.hpp"
#include "omiga/env.hpp"
#include "omiga/mixer.hpp"
#include "omiga/mlp.hpp"

namespace omiga {

/// Per-agent function approximators. Q_i takes o_i concatenated with a one-hot
/// action and returns a scalar, so the losses can only ever query dataset
/// actions. V_i maps o_i to a scalar, pi_i maps o_i to action logits.
struct AgentNets {
  int n_agents = 0;
  int obs_dim = 0;
  int n_actions = 0;
  std::vector<MlpParams> q;
  std::vector<MlpParams> q_target;
  std::vector<MlpParams> v;
  std::vector<MlpParams> pi;
};

enum class Variant { full, no_w, local_w };
Variant variant_from_string(const std::string& s);
std::string variant_to_string(Variant v);

enum class EvalMode { stochastic, greedy };
EvalMode eval_mode_from_string(const std::string& s);
std::string eval_mode_to_string(EvalMode m);

struct TrainConfig {
  double alpha = 10.0;
  double gamma = 0.99;
  double tau = 0.005;
  double lr_q = 5e-4;
  double lr_v = 5e-4;
  double lr_pi = 5e-4;
  int batch_size = 128;
  long steps = 20000;
  uint64_t seed = 0;
  double exp_clamp = 20.0;     // upper clamp on the v-loss exponent
  double weight_clamp = 100.0; // cap on the policy extraction weight
  std::vector<int> hidden = {256, 256};
  std::vector<int> mixer_hidden = {64};
  int eval_interval = 500;
  int eval_episodes = 32;
  EvalMode eval_mode = EvalMode::stochastic;
  Variant variant = Variant::full;

  void validate() const;
};

/// Tag-based trainer configuration: "full" is the default trainer, "no_w"
/// replaces w_i with 1 in the V and policy objectives, "local_w" feeds only
/// o_i into the weight network.
TrainConfig ablation_variant(TrainConfig base, const std::string& tag);

struct MetricsRow {
  long step = 0;
  double v_loss = 0.0;
  double q_loss = 0.0;
  double pi_loss = 0.0;
  double mean_w = 0.0;
  double eval_return = 0.0;
};

/// Exact column order: step,v_loss,q_loss,pi_loss,mean_w,eval_return
std::string metrics_to_csv(const std::vector<MetricsRow>& rows);

struct Checkpoint {
  AgentNets nets;
  MixerParams mixer;
  TrainConfig config;
};

/// Checkpoint JSON: network name -> layer list of {rows, cols, weights, bias},
/// plus a "config" block. Names: q_<i>, q_target_<i>, v_<i>, pi_<i>, mixer_w,
/// mixer_b.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
std::string checkpoint_to_json_text(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json_text(const std::string& text);

AgentNets init_agent_nets(int n_agents, int obs_dim, int n_actions,
                          const std::vector<int>& hidden, Rng& rng);
Checkpoint init_checkpoint(int n_agents, int obs_dim, int n_actions, const TrainConfig& cfg);

struct VLossResult {
  double loss = 0.0;
  std::vector<MlpGrads> v_grads;
  double mean_w = 0.0;
};

/// Expectile-free in-sample V objective: mean over samples and agents of
/// exp(clamp(w_i(o) (Qbar_i - V_i)/alpha)) + w_i(o) V_i/alpha. Weights and
/// target Q values are constants; gradients flow only into V_i.
VLossResult v_loss(const Batch& batch, const AgentNets& nets, const MixerParams& mixer,
                   const TrainConfig& cfg);

struct QLossResult {
  double loss = 0.0;
  std::vector<MlpGrads> q_grads;
  MlpGrads w_grads;
  MlpGrads b_grads;
  double mean_w = 0.0;
};

/// TD regression on the mixed values: mean of (r + gamma (1-done) V_tot(o') -
/// Q_tot(o, a))^2. V_i values are constants; gradients flow into Q_i and the
/// weight/offset networks through both observations.
QLossResult q_loss(const Batch& batch, const AgentNets& nets, const MixerParams& mixer,
                   const TrainConfig& cfg);

struct PolicyLossResult {
  double loss = 0.0;
  std::vector<MlpGrads> pi_grads;
};

/// Advantage-weighted log-likelihood: -mean of min(exp(w_i(o) (Q_i - V_i)/
/// alpha), W_max) * log pi_i(a_i|o_i). The weight is a constant; gradients
/// flow only into the policy logits.
PolicyLossResult policy_loss(const Batch& batch, const AgentNets& nets,
                             const MixerParams& mixer, const TrainConfig& cfg);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<MetricsRow> metrics;
};

/// One gradient step per objective per iteration, in order: V, then Q/w/b,
/// then policy, then target soft-update. A metrics row is emitted every
/// eval_interval steps and at the final step.
TrainResult train(const Dataset& ds, const Env& eval_env, const TrainConfig& cfg);

/// Behavior cloning on the same policy architecture; V/Q/mixer stay at init.
TrainResult bc_train(const Dataset& ds, const Env& eval_env, const TrainConfig& cfg);

struct EvalResult {
  double mean = 0.0;
  double stddev = 0.0;
  int episodes = 0;
};

/// Decentralized execution: each agent acts from its own observation only.
/// Returns undiscounted episode-return statistics.
EvalResult evaluate(const Checkpoint& ckpt, const Env& env, int episodes, uint64_t seed,
                    EvalMode mode);

std::vector<double> log_softmax(std::span<const double> logits);

}  // namespace omiga
