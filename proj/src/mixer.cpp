#include "omiga/mixer.hpp"

#include <cmath>

#include "omiga/errors.hpp"

namespace omiga {

std::vector<double> concat_obs(const JointObs& obs) {
  std::vector<double> flat;
  for (const auto& o : obs) flat.insert(flat.end(), o.begin(), o.end());
  return flat;
}

MixerParams mixer_init(int n_agents, int obs_dim, const std::vector<int>& hidden,
                       WeightInput mode, Rng& rng) {
  if (n_agents < 1 || obs_dim < 1) throw ShapeError("mixer_init: bad dims");
  MixerParams p;
  p.mode = mode;
  p.n_agents = n_agents;
  p.obs_dim = obs_dim;
  const int w_in = mode == WeightInput::joint ? n_agents * obs_dim : obs_dim;
  std::vector<int> wd{w_in};
  wd.insert(wd.end(), hidden.begin(), hidden.end());
  wd.push_back(n_agents);
  p.w_net = mlp_init(wd, rng);
  std::vector<int> bd{n_agents * obs_dim};
  bd.insert(bd.end(), hidden.begin(), hidden.end());
  bd.push_back(1);
  p.b_net = mlp_init(bd, rng);
  return p;
}

MixerEval mixer_weights(const MixerParams& p, const JointObs& obs, bool with_tape) {
  if (static_cast<int>(obs.size()) != p.n_agents)
    throw ShapeError("mixer_weights: expected one observation per agent");
  for (const auto& o : obs)
    if (static_cast<int>(o.size()) != p.obs_dim)
      throw ShapeError("mixer_weights: observation dim mismatch");

  MixerEval ev;
  ev.has_tape = with_tape;
  const std::vector<double> flat = concat_obs(obs);
  if (p.mode == WeightInput::joint) {
    ev.w_tapes.resize(with_tape ? 1 : 0);
    ev.raw = mlp_forward(p.w_net, flat, with_tape ? &ev.w_tapes[0] : nullptr);
  } else {
    ev.w_tapes.resize(with_tape ? p.n_agents : 0);
    ev.raw.resize(p.n_agents);
    for (int i = 0; i < p.n_agents; ++i) {
      auto out = mlp_forward(p.w_net, obs[i], with_tape ? &ev.w_tapes[i] : nullptr);
      ev.raw[i] = out[i];
    }
  }
  ev.w.resize(p.n_agents);
  for (int i = 0; i < p.n_agents; ++i) ev.w[i] = std::abs(ev.raw[i]);
  ev.b = mlp_forward(p.b_net, flat, with_tape ? &ev.b_tape : nullptr)[0];
  return ev;
}

static double mix(std::span<const double> w, double b, std::span<const double> vals) {
  if (w.size() != vals.size()) throw ShapeError("mix: weight/value length mismatch");
  double acc = b;
  for (size_t i = 0; i < w.size(); ++i) acc += w[i] * vals[i];
  return acc;
}

double mix_q(std::span<const double> w, double b, std::span<const double> local_qs) {
  return mix(w, b, local_qs);
}

double mix_v(std::span<const double> w, double b, std::span<const double> local_vs) {
  return mix(w, b, local_vs);
}

void mixer_backward(const MixerParams& p, const MixerEval& eval, std::span<const double> dw,
                    double db, MlpGrads& w_grads, MlpGrads& b_grads) {
  if (!eval.has_tape) throw UsageError("mixer_backward: evaluation was taken without a tape");
  if (static_cast<int>(dw.size()) != p.n_agents)
    throw ShapeError("mixer_backward: dw length mismatch");

  auto sgn = [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); };
  if (p.mode == WeightInput::joint) {
    std::vector<double> up(p.n_agents);
    for (int i = 0; i < p.n_agents; ++i) up[i] = dw[i] * sgn(eval.raw[i]);
    mlp_backward_accum(p.w_net, eval.w_tapes[0], up, w_grads);
  } else {
    std::vector<double> up(p.n_agents, 0.0);
    for (int i = 0; i < p.n_agents; ++i) {
      std::fill(up.begin(), up.end(), 0.0);
      up[i] = dw[i] * sgn(eval.raw[i]);
      mlp_backward_accum(p.w_net, eval.w_tapes[i], up, w_grads);
    }
  }
  const double bup[1] = {db};
  mlp_backward_accum(p.b_net, eval.b_tape, bup, b_grads);
}

}  // namespace omiga
