#include "omiga/mlp.hpp"

#include <cmath>
#include <string>

#include "omiga/errors.hpp"

namespace omiga {

std::size_t MlpParams::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.w.size() + l.b.size();
  return n;
}

void MlpParams::validate() const {
  if (layers.empty()) throw ShapeError("mlp: no layers");
  for (size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (l.in <= 0 || l.out <= 0) throw ShapeError("mlp: non-positive layer dims");
    if (l.w.size() != static_cast<size_t>(l.in) * l.out || l.b.size() != static_cast<size_t>(l.out))
      throw ShapeError("mlp: layer storage does not match dims");
    if (k > 0 && layers[k - 1].out != l.in)
      throw ShapeError("mlp: layer " + std::to_string(k) + " input dim " + std::to_string(l.in) +
                       " does not chain from " + std::to_string(layers[k - 1].out));
    for (double x : l.w)
      if (!std::isfinite(x)) throw ShapeError("mlp: non-finite weight");
    for (double x : l.b)
      if (!std::isfinite(x)) throw ShapeError("mlp: non-finite bias");
  }
}

static MlpParams make_shape(const std::vector<int>& dims) {
  if (dims.size() < 2) throw ShapeError("mlp: need at least input and output dims");
  MlpParams p;
  for (size_t k = 0; k + 1 < dims.size(); ++k) {
    Layer l;
    l.in = dims[k];
    l.out = dims[k + 1];
    if (l.in <= 0 || l.out <= 0) throw ShapeError("mlp: non-positive dim");
    l.w.assign(static_cast<size_t>(l.in) * l.out, 0.0);
    l.b.assign(l.out, 0.0);
    p.layers.push_back(std::move(l));
  }
  return p;
}

MlpParams mlp_zeros(const std::vector<int>& dims) { return make_shape(dims); }

MlpParams mlp_init(const std::vector<int>& dims, Rng& rng) {
  MlpParams p = make_shape(dims);
  for (auto& l : p.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
    for (auto& x : l.w) x = rng.uniform(-bound, bound);
    for (auto& x : l.b) x = rng.uniform(-bound, bound);
  }
  return p;
}

std::vector<double> mlp_forward(const MlpParams& p, std::span<const double> input,
                                GradTape* tape) {
  if (p.layers.empty()) throw ShapeError("mlp_forward: empty net");
  if (static_cast<int>(input.size()) != p.input_dim())
    throw ShapeError("mlp_forward: input size " + std::to_string(input.size()) +
                     " != " + std::to_string(p.input_dim()));
  if (tape) {
    tape->inputs.clear();
    tape->preacts.clear();
  }
  std::vector<double> x(input.begin(), input.end());
  const size_t last = p.layers.size() - 1;
  for (size_t k = 0; k < p.layers.size(); ++k) {
    const Layer& l = p.layers[k];
    if (tape) tape->inputs.push_back(x);
    std::vector<double> z(l.out);
    const double* w = l.w.data();
    for (int o = 0; o < l.out; ++o) {
      double acc = l.b[o];
      const double* row = w + static_cast<size_t>(o) * l.in;
      for (int i = 0; i < l.in; ++i) acc += row[i] * x[i];
      z[o] = acc;
    }
    if (tape) tape->preacts.push_back(z);
    if (k != last)
      for (auto& v : z) v = v > 0.0 ? v : 0.0;
    x = std::move(z);
  }
  return x;
}

void mlp_backward_accum(const MlpParams& p, const GradTape& tape,
                        std::span<const double> upstream, MlpGrads& grads,
                        std::vector<double>* input_grad) {
  if (tape.inputs.size() != p.layers.size())
    throw ShapeError("mlp_backward: tape does not match params");
  if (static_cast<int>(upstream.size()) != p.output_dim())
    throw ShapeError("mlp_backward: upstream size mismatch");
  if (grads.layers.size() != p.layers.size())
    throw ShapeError("mlp_backward: grads shape mismatch");

  std::vector<double> delta(upstream.begin(), upstream.end());
  for (int k = static_cast<int>(p.layers.size()) - 1; k >= 0; --k) {
    const Layer& l = p.layers[k];
    Layer& g = grads.layers[k];
    const auto& x = tape.inputs[k];
    for (int o = 0; o < l.out; ++o) {
      const double d = delta[o];
      g.b[o] += d;
      double* grow = g.w.data() + static_cast<size_t>(o) * l.in;
      for (int i = 0; i < l.in; ++i) grow[i] += d * x[i];
    }
    if (k > 0 || input_grad) {
      std::vector<double> prev(l.in, 0.0);
      for (int o = 0; o < l.out; ++o) {
        const double d = delta[o];
        const double* row = l.w.data() + static_cast<size_t>(o) * l.in;
        for (int i = 0; i < l.in; ++i) prev[i] += d * row[i];
      }
      if (k > 0) {
        const auto& pre = tape.preacts[k - 1];
        for (int i = 0; i < l.in; ++i)
          if (pre[i] <= 0.0) prev[i] = 0.0;  // relu kink: zero subgradient
      } else if (input_grad) {
        *input_grad = prev;
        break;
      }
      delta = std::move(prev);
    }
  }
}

MlpGrads mlp_backward(const MlpParams& p, const GradTape& tape,
                      std::span<const double> upstream) {
  MlpGrads g = MlpGrads::zeros_like(p);
  mlp_backward_accum(p, tape, upstream, g);
  return g;
}

MlpGrads MlpGrads::zeros_like(const MlpParams& p) {
  MlpGrads g;
  for (const auto& l : p.layers) {
    Layer gl;
    gl.in = l.in;
    gl.out = l.out;
    gl.w.assign(l.w.size(), 0.0);
    gl.b.assign(l.b.size(), 0.0);
    g.layers.push_back(std::move(gl));
  }
  return g;
}

void MlpGrads::zero() {
  for (auto& l : layers) {
    std::fill(l.w.begin(), l.w.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
}

void MlpGrads::scale(double s) {
  for (auto& l : layers) {
    for (auto& x : l.w) x *= s;
    for (auto& x : l.b) x *= s;
  }
}

bool MlpGrads::finite() const {
  for (const auto& l : layers) {
    for (double x : l.w)
      if (!std::isfinite(x)) return false;
    for (double x : l.b)
      if (!std::isfinite(x)) return false;
  }
  return true;
}

AdamState AdamState::create(const MlpParams& p, double lr_) {
  AdamState s;
  s.m = MlpGrads::zeros_like(p);
  s.v = MlpGrads::zeros_like(p);
  s.lr = lr_;
  return s;
}

static void adam_update_span(std::span<double> param, std::span<const double> grad,
                             std::span<double> m, std::span<double> v,
                             const AdamState& s, double bc1, double bc2) {
  for (size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g;
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g * g;
    const double mh = m[i] / bc1;
    const double vh = v[i] / bc2;
    param[i] -= s.lr * mh / (std::sqrt(vh) + s.eps);
  }
}

void adam_step(MlpParams& p, const MlpGrads& grads, AdamState& state) {
  if (grads.layers.size() != p.layers.size())
    throw ShapeError("adam_step: shape mismatch");
  if (!grads.finite())
    throw NumericError("adam_step: non-finite gradient at step " +
                       std::to_string(state.step + 1));
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t k = 0; k < p.layers.size(); ++k) {
    adam_update_span(p.layers[k].w, grads.layers[k].w, state.m.layers[k].w,
                     state.v.layers[k].w, state, bc1, bc2);
    adam_update_span(p.layers[k].b, grads.layers[k].b, state.m.layers[k].b,
                     state.v.layers[k].b, state, bc1, bc2);
  }
}

void soft_update(MlpParams& target, const MlpParams& online, double tau) {
  if (tau < 0.0 || tau > 1.0) throw ParamError("soft_update: tau outside [0,1]");
  if (target.layers.size() != online.layers.size())
    throw ShapeError("soft_update: layer count mismatch");
  for (size_t k = 0; k < target.layers.size(); ++k) {
    auto& t = target.layers[k];
    const auto& o = online.layers[k];
    if (t.w.size() != o.w.size() || t.b.size() != o.b.size())
      throw ShapeError("soft_update: layer shape mismatch");
    for (size_t i = 0; i < t.w.size(); ++i) t.w[i] = (1.0 - tau) * t.w[i] + tau * o.w[i];
    for (size_t i = 0; i < t.b.size(); ++i) t.b[i] = (1.0 - tau) * t.b[i] + tau * o.b[i];
  }
}

}  // namespace omiga
