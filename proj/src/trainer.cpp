#include "omiga/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "omiga/errors.hpp"

namespace omiga {

Variant variant_from_string(const std::string& s) {
  if (s == "full") return Variant::full;
  if (s == "no_w") return Variant::no_w;
  if (s == "local_w") return Variant::local_w;
  throw ParamError("unknown variant '" + s + "' (expected full|no_w|local_w)");
}

std::string variant_to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_w: return "no_w";
    case Variant::local_w: return "local_w";
  }
  return "full";
}

EvalMode eval_mode_from_string(const std::string& s) {
  if (s == "stochastic") return EvalMode::stochastic;
  if (s == "greedy") return EvalMode::greedy;
  throw ParamError("unknown eval mode '" + s + "' (expected stochastic|greedy)");
}

std::string eval_mode_to_string(EvalMode m) {
  return m == EvalMode::stochastic ? "stochastic" : "greedy";
}

void TrainConfig::validate() const {
  if (alpha <= 0.0) throw ParamError("config: alpha must be positive");
  if (gamma < 0.0 || gamma >= 1.0) throw ParamError("config: gamma must lie in [0,1)");
  if (tau < 0.0 || tau > 1.0) throw ParamError("config: tau must lie in [0,1]");
  if (lr_q <= 0.0 || lr_v <= 0.0 || lr_pi <= 0.0)
    throw ParamError("config: learning rates must be positive");
  if (batch_size < 1) throw ParamError("config: batch_size must be >= 1");
  if (steps < 0) throw ParamError("config: steps must be >= 0");
  if (exp_clamp <= 0.0 || weight_clamp <= 0.0)
    throw ParamError("config: clamps must be positive");
  if (eval_interval < 1) throw ParamError("config: eval_interval must be >= 1");
  if (eval_episodes < 1) throw ParamError("config: eval_episodes must be >= 1");
}

TrainConfig ablation_variant(TrainConfig base, const std::string& tag) {
  base.variant = variant_from_string(tag);
  return base;
}

static std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "step,v_loss,q_loss,pi_loss,mean_w,eval_return\n";
  for (const auto& r : rows) {
    out += std::to_string(r.step);
    out += ',';
    out += fmt_double(r.v_loss);
    out += ',';
    out += fmt_double(r.q_loss);
    out += ',';
    out += fmt_double(r.pi_loss);
    out += ',';
    out += fmt_double(r.mean_w);
    out += ',';
    out += fmt_double(r.eval_return);
    out += '\n';
  }
  return out;
}

AgentNets init_agent_nets(int n_agents, int obs_dim, int n_actions,
                          const std::vector<int>& hidden, Rng& rng) {
  if (n_agents < 1 || obs_dim < 1 || n_actions < 1)
    throw ShapeError("init_agent_nets: bad dims");
  AgentNets nets;
  nets.n_agents = n_agents;
  nets.obs_dim = obs_dim;
  nets.n_actions = n_actions;
  auto dims = [&hidden](int in, int out) {
    std::vector<int> d{in};
    d.insert(d.end(), hidden.begin(), hidden.end());
    d.push_back(out);
    return d;
  };
  for (int i = 0; i < n_agents; ++i) {
    nets.q.push_back(mlp_init(dims(obs_dim + n_actions, 1), rng));
    nets.v.push_back(mlp_init(dims(obs_dim, 1), rng));
    nets.pi.push_back(mlp_init(dims(obs_dim, n_actions), rng));
  }
  nets.q_target = nets.q;
  return nets;
}

Checkpoint init_checkpoint(int n_agents, int obs_dim, int n_actions, const TrainConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, "init"));
  Checkpoint ckpt;
  ckpt.nets = init_agent_nets(n_agents, obs_dim, n_actions, cfg.hidden, rng);
  const WeightInput mode =
      cfg.variant == Variant::local_w ? WeightInput::local : WeightInput::joint;
  ckpt.mixer = mixer_init(n_agents, obs_dim, cfg.mixer_hidden, mode, rng);
  ckpt.config = cfg;
  return ckpt;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

// Q input: observation concatenated with a one-hot action taken from the
// batch. This encoder is the single place actions enter a value network.
static std::vector<double> q_input(const Obs& o, int action, int n_actions) {
  if (action < 0 || action >= n_actions)
    throw ParamError("q_input: action outside [0, n_actions)");
  std::vector<double> x(o.size() + n_actions, 0.0);
  std::copy(o.begin(), o.end(), x.begin());
  x[o.size() + action] = 1.0;
  return x;
}

static void check_batch(const Batch& batch, const AgentNets& nets) {
  if (batch.size() == 0) throw UsageError("loss: batch is empty");
  for (int s = 0; s < batch.size(); ++s) {
    if (static_cast<int>(batch.obs[s].size()) != nets.n_agents ||
        static_cast<int>(batch.act[s].size()) != nets.n_agents)
      throw ShapeError("loss: batch row does not match agent count");
  }
}

VLossResult v_loss(const Batch& batch, const AgentNets& nets, const MixerParams& mixer,
                   const TrainConfig& cfg) {
  check_batch(batch, nets);
  const int B = batch.size();
  const int n = nets.n_agents;
  VLossResult res;
  for (int i = 0; i < n; ++i) res.v_grads.push_back(MlpGrads::zeros_like(nets.v[i]));

  const double inv = 1.0 / (static_cast<double>(B) * n);
  double loss = 0.0, wsum = 0.0;
  GradTape tape;
  for (int s = 0; s < B; ++s) {
    std::vector<double> w(n, 1.0);
    if (cfg.variant != Variant::no_w) w = mixer_weights(mixer, batch.obs[s]).w;
    for (int i = 0; i < n; ++i) {
      const double qbar =
          mlp_forward(nets.q_target[i], q_input(batch.obs[s][i], batch.act[s][i], nets.n_actions))[0];
      const double vi = mlp_forward(nets.v[i], batch.obs[s][i], &tape)[0];
      const double z = w[i] * (qbar - vi) / cfg.alpha;
      const bool clamped = z > cfg.exp_clamp;
      const double zc = clamped ? cfg.exp_clamp : z;
      const double term = std::exp(zc) + w[i] * vi / cfg.alpha;
      if (!std::isfinite(term))
        throw NumericError("v_loss: non-finite term (exponent=" + std::to_string(z) + ")");
      loss += term;
      wsum += w[i];
      const double dv = (clamped ? 0.0 : -std::exp(zc) * w[i] / cfg.alpha) + w[i] / cfg.alpha;
      const double up[1] = {dv * inv};
      mlp_backward_accum(nets.v[i], tape, up, res.v_grads[i]);
    }
  }
  res.loss = loss * inv;
  res.mean_w = wsum * inv;
  return res;
}

QLossResult q_loss(const Batch& batch, const AgentNets& nets, const MixerParams& mixer,
                   const TrainConfig& cfg) {
  check_batch(batch, nets);
  const int B = batch.size();
  const int n = nets.n_agents;
  QLossResult res;
  for (int i = 0; i < n; ++i) res.q_grads.push_back(MlpGrads::zeros_like(nets.q[i]));
  res.w_grads = MlpGrads::zeros_like(mixer.w_net);
  res.b_grads = MlpGrads::zeros_like(mixer.b_net);

  double loss = 0.0, wsum = 0.0;
  std::vector<double> qs(n), vps(n), dws(n);
  std::vector<GradTape> qtapes(n);
  for (int s = 0; s < B; ++s) {
    MixerEval evo = mixer_weights(mixer, batch.obs[s], true);
    MixerEval evn = mixer_weights(mixer, batch.next_obs[s], true);
    for (int i = 0; i < n; ++i) {
      qs[i] = mlp_forward(nets.q[i], q_input(batch.obs[s][i], batch.act[s][i], nets.n_actions),
                          &qtapes[i])[0];
      vps[i] = mlp_forward(nets.v[i], batch.next_obs[s][i])[0];
      wsum += evo.w[i];
    }
    const double q_tot = mix_q(evo.w, evo.b, qs);
    const double not_done = batch.done[s] ? 0.0 : 1.0;
    const double v_tot_next = mix_v(evn.w, evn.b, vps);
    const double target = batch.rew[s] + cfg.gamma * not_done * v_tot_next;
    const double err = q_tot - target;
    if (!std::isfinite(err * err))
      throw NumericError("q_loss: non-finite squared TD error (q_tot=" + std::to_string(q_tot) +
                         ", target=" + std::to_string(target) + ")");
    loss += err * err;

    const double g = 2.0 * err / B;
    for (int i = 0; i < n; ++i) {
      const double up[1] = {g * evo.w[i]};
      mlp_backward_accum(nets.q[i], qtapes[i], up, res.q_grads[i]);
      dws[i] = g * qs[i];
    }
    mixer_backward(mixer, evo, dws, g, res.w_grads, res.b_grads);
    if (not_done > 0.0) {
      const double gv = -g * cfg.gamma;
      for (int i = 0; i < n; ++i) dws[i] = gv * vps[i];
      mixer_backward(mixer, evn, dws, gv, res.w_grads, res.b_grads);
    }
  }
  res.loss = loss / B;
  res.mean_w = wsum / (static_cast<double>(B) * n);
  return res;
}

static PolicyLossResult policy_loss_impl(const Batch& batch, const AgentNets& nets,
                                         const MixerParams& mixer, const TrainConfig& cfg,
                                         bool clone_only) {
  check_batch(batch, nets);
  const int B = batch.size();
  const int n = nets.n_agents;
  PolicyLossResult res;
  for (int i = 0; i < n; ++i) res.pi_grads.push_back(MlpGrads::zeros_like(nets.pi[i]));

  const double inv = 1.0 / (static_cast<double>(B) * n);
  const double log_cap = std::log(cfg.weight_clamp);
  double loss = 0.0;
  GradTape tape;
  std::vector<double> up(nets.n_actions);
  for (int s = 0; s < B; ++s) {
    std::vector<double> w(n, 1.0);
    if (!clone_only && cfg.variant != Variant::no_w) w = mixer_weights(mixer, batch.obs[s]).w;
    for (int i = 0; i < n; ++i) {
      double weight = 1.0;
      if (!clone_only) {
        const double qi = mlp_forward(
            nets.q[i], q_input(batch.obs[s][i], batch.act[s][i], nets.n_actions))[0];
        const double vi = mlp_forward(nets.v[i], batch.obs[s][i])[0];
        const double ex = w[i] * (qi - vi) / cfg.alpha;
        if (!std::isfinite(ex))
          throw NumericError("policy_loss: non-finite advantage exponent");
        weight = ex >= log_cap ? cfg.weight_clamp : std::exp(ex);
      }
      const std::vector<double> logits = mlp_forward(nets.pi[i], batch.obs[s][i], &tape);
      const std::vector<double> logp = log_softmax(logits);
      const int a = batch.act[s][i];
      loss -= weight * logp[a];
      for (int k = 0; k < nets.n_actions; ++k)
        up[k] = weight * inv * (std::exp(logp[k]) - (k == a ? 1.0 : 0.0));
      mlp_backward_accum(nets.pi[i], tape, up, res.pi_grads[i]);
    }
  }
  res.loss = loss * inv;
  if (!std::isfinite(res.loss)) throw NumericError("policy_loss: non-finite loss");
  return res;
}

PolicyLossResult policy_loss(const Batch& batch, const AgentNets& nets,
                             const MixerParams& mixer, const TrainConfig& cfg) {
  return policy_loss_impl(batch, nets, mixer, cfg, false);
}

static EvalResult run_eval(const Checkpoint& ckpt, const Env& env, int episodes, uint64_t seed,
                           EvalMode mode);

static void eval_compatible(const Checkpoint& ckpt, const Env& env) {
  if (ckpt.nets.n_agents != env.n_agents() || ckpt.nets.obs_dim != env.obs_dim() ||
      ckpt.nets.n_actions != env.n_actions())
    throw CompatibilityError("checkpoint dims do not match environment");
}

template <typename StepFn>
static TrainResult train_loop(const Dataset& ds, const Env& eval_env, const TrainConfig& cfg,
                              StepFn step_fn, Checkpoint ckpt) {
  if (ds.manifest.env_name != eval_env.name() || ds.manifest.n_agents != eval_env.n_agents() ||
      ds.manifest.obs_dim != eval_env.obs_dim() ||
      ds.manifest.action_count != eval_env.n_actions())
    throw CompatibilityError("dataset does not match evaluation environment");
  if (ds.transitions.empty()) throw UsageError("train: dataset is empty");

  TrainResult out;
  Rng batch_rng(derive_seed(cfg.seed, "batch"));
  for (long t = 1; t <= cfg.steps; ++t) {
    Batch batch = sample_batch(ds, std::min<long>(cfg.batch_size, ds.manifest.n_transitions),
                               batch_rng);
    MetricsRow row = step_fn(ckpt, batch, t);
    if (t % cfg.eval_interval == 0 || t == cfg.steps) {
      row.step = t;
      EvalResult er = run_eval(ckpt, eval_env, cfg.eval_episodes,
                               derive_seed(cfg.seed, "eval", static_cast<uint64_t>(t)),
                               cfg.eval_mode);
      row.eval_return = er.mean;
      out.metrics.push_back(row);
    }
  }
  out.checkpoint = std::move(ckpt);
  return out;
}

TrainResult train(const Dataset& ds, const Env& eval_env, const TrainConfig& cfg) {
  cfg.validate();
  Checkpoint ckpt = init_checkpoint(eval_env.n_agents(), eval_env.obs_dim(),
                                    eval_env.n_actions(), cfg);
  struct Optims {
    std::vector<AdamState> v, q, pi;
    AdamState w, b;
  } opt{{}, {}, {}, AdamState::create(ckpt.mixer.w_net, cfg.lr_q),
        AdamState::create(ckpt.mixer.b_net, cfg.lr_q)};
  for (int i = 0; i < ckpt.nets.n_agents; ++i) {
    opt.v.push_back(AdamState::create(ckpt.nets.v[i], cfg.lr_v));
    opt.q.push_back(AdamState::create(ckpt.nets.q[i], cfg.lr_q));
    opt.pi.push_back(AdamState::create(ckpt.nets.pi[i], cfg.lr_pi));
  }

  auto step_fn = [&](Checkpoint& c, const Batch& batch, long t) -> MetricsRow {
    MetricsRow row;
    try {
      VLossResult vres = v_loss(batch, c.nets, c.mixer, cfg);
      for (int i = 0; i < c.nets.n_agents; ++i) adam_step(c.nets.v[i], vres.v_grads[i], opt.v[i]);

      QLossResult qres = q_loss(batch, c.nets, c.mixer, cfg);
      for (int i = 0; i < c.nets.n_agents; ++i) adam_step(c.nets.q[i], qres.q_grads[i], opt.q[i]);
      adam_step(c.mixer.w_net, qres.w_grads, opt.w);
      adam_step(c.mixer.b_net, qres.b_grads, opt.b);

      PolicyLossResult pres = policy_loss(batch, c.nets, c.mixer, cfg);
      for (int i = 0; i < c.nets.n_agents; ++i)
        adam_step(c.nets.pi[i], pres.pi_grads[i], opt.pi[i]);

      for (int i = 0; i < c.nets.n_agents; ++i)
        soft_update(c.nets.q_target[i], c.nets.q[i], cfg.tau);

      row.v_loss = vres.loss;
      row.q_loss = qres.loss;
      row.pi_loss = pres.loss;
      row.mean_w = qres.mean_w;
    } catch (const NumericError& e) {
      throw NumericError("train diverged at step " + std::to_string(t) + ": " + e.what());
    }
    return row;
  };
  return train_loop(ds, eval_env, cfg, step_fn, std::move(ckpt));
}

TrainResult bc_train(const Dataset& ds, const Env& eval_env, const TrainConfig& cfg) {
  cfg.validate();
  Checkpoint ckpt = init_checkpoint(eval_env.n_agents(), eval_env.obs_dim(),
                                    eval_env.n_actions(), cfg);
  std::vector<AdamState> opt;
  for (int i = 0; i < ckpt.nets.n_agents; ++i)
    opt.push_back(AdamState::create(ckpt.nets.pi[i], cfg.lr_pi));

  auto step_fn = [&](Checkpoint& c, const Batch& batch, long t) -> MetricsRow {
    MetricsRow row;
    try {
      PolicyLossResult pres = policy_loss_impl(batch, c.nets, c.mixer, cfg, true);
      for (int i = 0; i < c.nets.n_agents; ++i) adam_step(c.nets.pi[i], pres.pi_grads[i], opt[i]);
      row.pi_loss = pres.loss;
    } catch (const NumericError& e) {
      throw NumericError("bc_train diverged at step " + std::to_string(t) + ": " + e.what());
    }
    return row;
  };
  return train_loop(ds, eval_env, cfg, step_fn, std::move(ckpt));
}

static EvalResult run_eval(const Checkpoint& ckpt, const Env& env, int episodes, uint64_t seed,
                           EvalMode mode) {
  eval_compatible(ckpt, env);
  if (episodes < 1) throw ParamError("evaluate: episodes must be >= 1");
  std::vector<double> returns(episodes, 0.0);
  for (int ep = 0; ep < episodes; ++ep) {
    Rng rng(derive_seed(seed, "eval_ep", static_cast<uint64_t>(ep)));
    auto [state, obs] = env.reset(rng);
    double ret = 0.0;
    while (!state.done) {
      JointAction act(env.n_agents());
      for (int i = 0; i < env.n_agents(); ++i) {
        const std::vector<double> logits = mlp_forward(ckpt.nets.pi[i], obs[i]);
        const std::vector<double> logp = log_softmax(logits);
        if (mode == EvalMode::greedy) {
          int best = 0;
          for (int k = 1; k < env.n_actions(); ++k)
            if (logp[k] > logp[best]) best = k;
          act[i] = best;
        } else {
          std::vector<double> probs(logp.size());
          for (size_t k = 0; k < logp.size(); ++k) probs[k] = std::exp(logp[k]);
          act[i] = rng.categorical(probs);
        }
      }
      StepResult res = env.step(state, act, rng);
      ret += res.reward;
      obs = res.obs;
      state = res.next;
    }
    returns[ep] = ret;
  }
  EvalResult r;
  r.episodes = episodes;
  for (double x : returns) r.mean += x;
  r.mean /= episodes;
  double var = 0.0;
  for (double x : returns) var += (x - r.mean) * (x - r.mean);
  r.stddev = std::sqrt(var / episodes);
  return r;
}

EvalResult evaluate(const Checkpoint& ckpt, const Env& env, int episodes, uint64_t seed,
                    EvalMode mode) {
  return run_eval(ckpt, env, episodes, seed, mode);
}

}  // namespace omiga
