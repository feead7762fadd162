#pragma once

#include <span>
#include <vector>

#include "tiad/inpainter/tape.hpp"

namespace tiad::inpainter::ops {

/// Cross-correlation with zero padding. x {C,H,W}, w {O,C,K,K}, bias {O} or -1.
VarId conv2d(Tape& t, VarId x, VarId w, VarId bias, int stride, int padding);
/// Exact (erf) GELU.
VarId gelu(Tape& t, VarId x);
VarId sigmoid(Tape& t, VarId x);
/// {C·r², H, W} -> {C, H·r, W·r}; channel c·r²+i·r+j lands at offset (i, j).
VarId pixel_shuffle(Tape& t, VarId x, int factor = 2);
/// Channel concatenation of two {C,H,W} tensors with equal H, W.
VarId concat(Tape& t, VarId a, VarId b);
VarId select_channels(Tape& t, VarId x, std::span<const int> channels);

VarId add(Tape& t, VarId a, VarId b);
VarId sub(Tape& t, VarId a, VarId b);
VarId mul(Tape& t, VarId a, VarId b);
VarId div(Tape& t, VarId a, VarId b);
VarId scale(Tape& t, VarId a, double s);
VarId add_scalar(Tape& t, VarId a, double s);
VarId square(Tape& t, VarId a);
VarId abs(Tape& t, VarId a);
/// max(a, lo); gradient passes where a > lo.
VarId clamp_min(Tape& t, VarId a, double lo);
/// a^p for positive a.
VarId pow_scalar(Tape& t, VarId a, double p);

/// Sum of all elements -> {1}.
VarId sum(Tape& t, VarId a);
VarId mean(Tape& t, VarId a);

/// Depthwise 1-D valid correlation along rows (axis 2, width) or columns (axis 1, height).
VarId filter1d_valid(Tape& t, VarId x, std::span<const double> kernel, int axis);
/// Depthwise 3×3 valid correlation with a fixed kernel (row-major, 9 values).
VarId filter3x3_valid(Tape& t, VarId x, std::span<const double> kernel);
/// Edge-replicating pad by p on every side.
VarId pad_replicate(Tape& t, VarId x, int p);
/// 2×2 average pooling, stride 2, floor on odd sizes.
VarId avg_pool2(Tape& t, VarId x);

}  // namespace tiad::inpainter::ops
