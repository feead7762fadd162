#pragma once

#include <cstdint>
#include <vector>

#include "tiad/inpainter/network.hpp"

namespace tiad::inpainter {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moments and per-tensor step counts, aligned with ParamSet::items.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::vector<std::int64_t> steps;

  static AdamState zeros_like(const ParamSet& params);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

struct GroupRates {
  double backbone = 0.0;  // <= 0 freezes the group
  double head = 0.0;
  double for_group(ParamGroup g) const { return g == ParamGroup::Backbone ? backbone : head; }
};

/// Decoupled weight decay (p ← p·(1 − lr·wd)) followed by the bias-corrected
/// Adam update. Tensors of a frozen group are left bit-identical, moments included.
void adamw_step(ParamSet& params, const Gradients& grads, AdamState& state, const GroupRates& rates,
                double weight_decay, const AdamHyper& hyper = {});

double global_norm(const Gradients& grads);

/// Scales every gradient by max_norm / ‖g‖ when ‖g‖ > max_norm. Returns the pre-clip norm.
double clip_grad_norm(Gradients& grads, double max_norm);

/// ema ← decay·ema + (1 − decay)·params
void ema_update(ParamSet& ema, const ParamSet& params, double decay);

}  // namespace tiad::inpainter
