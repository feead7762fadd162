#include "tiad/inpainter/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "tiad/error.hpp"
#include "tiad/inpainter/ops.hpp"

namespace tiad::inpainter {
namespace {

constexpr std::array<double, 9> kLaplacian = {0, 1, 0, 1, -4, 1, 0, 1, 0};
constexpr std::array<int, 3> kRgb = {0, 1, 2};

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> g(size);
  double s = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - (size - 1) / 2.0;
    g[i] = std::exp(-d * d / (2 * sigma * sigma));
    s += g[i];
  }
  for (double& v : g) v /= s;
  return g;
}

VarId blur(Tape& t, VarId x, const std::vector<double>& g) {
  return ops::filter1d_valid(t, ops::filter1d_valid(t, x, g, 2), g, 1);
}

VarId masked_mean(Tape& t, VarId values, VarId mask) {
  double n = 0.0;
  for (double v : t.value(mask).values()) n += v;
  if (n <= 0.0) throw EmptyMask("loss mask is empty");
  return ops::scale(t, ops::sum(t, ops::mul(t, values, mask)), 1.0 / n);
}

}  // namespace

VarId loss_l1(Tape& t, VarId pred, VarId target, VarId mask) {
  return masked_mean(t, ops::abs(t, ops::sub(t, pred, target)), mask);
}

int ms_ssim_scales(int height, int width, int window) {
  const int side = std::min(height, width);
  int m = 0;
  // Each pooling halves with floor; the coarsest level still needs a full window.
  while (m < 5 && (side >> m) >= window) ++m;
  return m;
}

VarId loss_ms_ssim(Tape& t, VarId pred, VarId target, const MsSsimOptions& o) {
  const Tensor& p = t.value(pred);
  if (!p.same_shape(t.value(target))) throw ShapeError("ms-ssim shape mismatch");
  const int scales = ms_ssim_scales(p.height(), p.width(), o.window);
  if (scales < 1) throw ShapeError("image smaller than the ms-ssim window");
  double wsum = 0.0;
  for (int j = 0; j < scales; ++j) wsum += kMsSsimWeights[j];
  const auto g = gaussian_window(o.window, o.sigma);

  VarId x = pred, y = target;
  VarId product = -1;
  for (int j = 0; j < scales; ++j) {
    const VarId mx = blur(t, x, g), my = blur(t, y, g);
    const VarId mx2 = ops::square(t, mx), my2 = ops::square(t, my), mxy = ops::mul(t, mx, my);
    const VarId sx = ops::sub(t, blur(t, ops::square(t, x), g), mx2);
    const VarId sy = ops::sub(t, blur(t, ops::square(t, y), g), my2);
    const VarId sxy = ops::sub(t, blur(t, ops::mul(t, x, y), g), mxy);
    const VarId cs_map = ops::div(t, ops::add_scalar(t, ops::scale(t, sxy, 2.0), o.c2),
                                  ops::add_scalar(t, ops::add(t, sx, sy), o.c2));
    VarId term;
    if (j + 1 < scales) {
      term = ops::mean(t, cs_map);
    } else {
      const VarId lum = ops::div(t, ops::add_scalar(t, ops::scale(t, mxy, 2.0), o.c1),
                                 ops::add_scalar(t, ops::add(t, mx2, my2), o.c1));
      term = ops::mean(t, ops::mul(t, lum, cs_map));
    }
    const VarId powered = ops::pow_scalar(t, ops::clamp_min(t, term, o.floor), kMsSsimWeights[j] / wsum);
    product = product < 0 ? powered : ops::mul(t, product, powered);
    if (j + 1 < scales) {
      x = ops::avg_pool2(t, x);
      y = ops::avg_pool2(t, y);
    }
  }
  return ops::add_scalar(t, ops::scale(t, product, -1.0), 1.0);
}

VarId loss_hf(Tape& t, VarId pred, VarId target, VarId mask) {
  const VarId lp = ops::filter3x3_valid(t, ops::pad_replicate(t, pred, 1), kLaplacian);
  const VarId lt = ops::filter3x3_valid(t, ops::pad_replicate(t, target, 1), kLaplacian);
  return masked_mean(t, ops::abs(t, ops::sub(t, lp, lt)), mask);
}

LossWeights::Lambdas LossWeights::at(int finetune_epoch, bool warmup) const {
  if (warmup) return {};
  const double ramp = std::min(1.0, static_cast<double>(std::max(0, finetune_epoch)) / ramp_epochs);
  return {lambda_ssim_max * ramp, lambda_hf_max * ramp};
}

CombinedLoss combined_loss(Tape& t, VarId pred, VarId target, VarId mask, const LossWeights& weights,
                           int finetune_epoch, bool warmup) {
  CombinedLoss out;
  out.lambdas = weights.at(finetune_epoch, warmup);
  const VarId l1 = loss_l1(t, pred, target, mask);
  out.l1 = t.value(l1).item();
  VarId total = l1;
  if (out.lambdas.ssim > 0.0) {
    const VarId ssim =
        loss_ms_ssim(t, ops::select_channels(t, pred, kRgb), ops::select_channels(t, target, kRgb));
    out.ms_ssim = t.value(ssim).item();
    total = ops::add(t, total, ops::scale(t, ssim, out.lambdas.ssim));
  }
  if (out.lambdas.hf > 0.0) {
    const VarId hf = loss_hf(t, pred, target, mask);
    out.hf = t.value(hf).item();
    total = ops::add(t, total, ops::scale(t, hf, out.lambdas.hf));
  }
  out.total = total;
  return out;
}

}  // namespace tiad::inpainter
