#include "tiad/inpainter/optim.hpp"

#include <cmath>

#include "tiad/error.hpp"

namespace tiad::inpainter {

AdamState AdamState::zeros_like(const ParamSet& params) {
  AdamState s;
  for (const auto& p : params.items) {
    s.m.emplace_back(p.value.dims(), 0.0);
    s.v.emplace_back(p.value.dims(), 0.0);
    s.steps.push_back(0);
  }
  return s;
}

void adamw_step(ParamSet& params, const Gradients& grads, AdamState& state, const GroupRates& rates,
                double weight_decay, const AdamHyper& h) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw ShapeError("optimizer state does not match parameters");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param& p = params.items[k];
    const double lr = rates.for_group(p.group);
    if (lr <= 0.0) continue;
    const Tensor& g = grads[k];
    if (!g.same_shape(p.value)) throw ShapeError("gradient shape mismatch for " + p.name);
    const auto step = ++state.steps[k];
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(step));
    const double decay = 1.0 - lr * weight_decay;
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (std::size_t i = 0; i < g.numel(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.value[i] = p.value[i] * decay - lr * mhat / (std::sqrt(vhat) + h.eps);
    }
  }
}

double global_norm(const Gradients& grads) {
  double s = 0.0;
  for (const Tensor& g : grads) {
    for (double v : g.values()) s += v * v;
  }
  return std::sqrt(s);
}

double clip_grad_norm(Gradients& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (Tensor& g : grads) {
      for (double& v : g.values()) v *= f;
    }
  }
  return norm;
}

void ema_update(ParamSet& ema, const ParamSet& params, double decay) {
  if (ema.size() != params.size()) throw ShapeError("EMA/parameter count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& e = ema.items[k].value;
    const auto& p = params.items[k].value;
    if (!e.same_shape(p)) throw ShapeError("EMA shape mismatch for " + params.items[k].name);
    for (std::size_t i = 0; i < p.numel(); ++i) e[i] = decay * e[i] + (1.0 - decay) * p[i];
  }
}

}  // namespace tiad::inpainter
