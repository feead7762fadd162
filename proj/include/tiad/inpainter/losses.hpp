#pragma once

#include "tiad/inpainter/tape.hpp"

namespace tiad::inpainter {

/// Mean |pred − target| over masked pixels and all channels.
/// pred, target: {C,H,W}; mask: {C,H,W} of 0/1. Throws EmptyMask.
VarId loss_l1(Tape& t, VarId pred, VarId target, VarId mask);

struct MsSsimOptions {
  int window = 11;
  double sigma = 1.5;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
  /// Floor applied to per-scale terms before exponentiation.
  double floor = 1e-6;
};

/// Standard 5-scale exponents (sum to 1).
inline constexpr double kMsSsimWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

/// Scales usable at this size: the largest M <= 5 with floor(min(H,W) / 2^(M−1)) >= window.
int ms_ssim_scales(int height, int width, int window = 11);

/// 1 − MS-SSIM over all channels, Gaussian window, valid filtering, exponents
/// truncated to the usable scale count and renormalised. Throws ShapeError
/// when not even one scale fits.
VarId loss_ms_ssim(Tape& t, VarId pred, VarId target, const MsSsimOptions& options = {});

/// Masked mean L1 between edge-replicated 3×3 Laplacians of pred and target.
VarId loss_hf(Tape& t, VarId pred, VarId target, VarId mask);

struct LossWeights {
  double lambda_ssim_max = 0.15;
  double lambda_hf_max = 0.5;
  int ramp_epochs = 100;

  struct Lambdas {
    double ssim = 0.0;
    double hf = 0.0;
  };
  /// Zero during warmup; otherwise λ_max · min(1, finetune_epoch / ramp_epochs).
  Lambdas at(int finetune_epoch, bool warmup) const;
};

struct CombinedLoss {
  VarId total = -1;
  double l1 = 0.0;
  double ms_ssim = 0.0;
  double hf = 0.0;
  LossWeights::Lambdas lambdas;
};

/// L1 + λ_ssim·MS-SSIM(RGB) + λ_hf·HF. Terms with zero weight are still
/// reported but not added to the tape.
CombinedLoss combined_loss(Tape& t, VarId pred, VarId target, VarId mask, const LossWeights& weights,
                           int finetune_epoch, bool warmup);

}  // namespace tiad::inpainter
