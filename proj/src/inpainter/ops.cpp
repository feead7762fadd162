#include "tiad/inpainter/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "tiad/error.hpp"

namespace tiad::inpainter::ops {
namespace {

void require(bool cond, const char* what) {
  if (!cond) throw ShapeError(what);
}

int conv_out(int n, int k, int stride, int pad) { return (n + 2 * pad - k) / stride + 1; }

// Output columns whose input column ox*stride + offset lies in [0, n).
void valid_range(int out_n, int n, int stride, int offset, int& lo, int& hi) {
  lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  hi = (n - 1 - offset) >= 0 ? (n - 1 - offset) / stride + 1 : 0;
  hi = std::min(hi, out_n);
  if (lo > hi) lo = hi;
}

template <class F, class G>
VarId unary(Tape& t, VarId a, std::string_view name, F forward, G derivative) {
  const Tensor& x = t.value(a);
  Tensor y(x.dims());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = forward(x[i]);
  return t.record(name, std::move(y), {a}, [a, derivative](Tape& tp, VarId self) {
    const Tensor& g = tp.upstream(self);
    const Tensor& x = tp.value(a);
    const Tensor& y = tp.value(self);
    Tensor& ga = tp.grad_buffer(a);
    for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * derivative(x[i], y[i]);
  });
}

}  // namespace

VarId conv2d(Tape& t, VarId xi, VarId wi, VarId bi, int stride, int padding) {
  const Tensor& x = t.value(xi);
  const Tensor& w = t.value(wi);
  require(x.rank() == 3 && w.rank() == 4, "conv2d expects {C,H,W} input and {O,C,K,K} kernel");
  require(w.dim(1) == x.channels(), "conv2d channel mismatch");
  require(w.dim(2) == w.dim(3), "conv2d kernel must be square");
  const int C = x.channels(), H = x.height(), W = x.width();
  const int O = w.dim(0), K = w.dim(2);
  const int Ho = conv_out(H, K, stride, padding), Wo = conv_out(W, K, stride, padding);
  require(Ho > 0 && Wo > 0, "conv2d output is empty");
  if (bi >= 0) require(t.value(bi).numel() == static_cast<std::size_t>(O), "conv2d bias size");

  Tensor y({O, Ho, Wo});
  for (int o = 0; o < O; ++o) {
    double* yo = y.channel(o);
    if (bi >= 0) std::fill(yo, yo + static_cast<std::size_t>(Ho) * Wo, t.value(bi)[o]);
    for (int c = 0; c < C; ++c) {
      const double* xc = x.channel(c);
      for (int ky = 0; ky < K; ++ky) {
        for (int kx = 0; kx < K; ++kx) {
          const double wv = w[((static_cast<std::size_t>(o) * C + c) * K + ky) * K + kx];
          if (wv == 0.0) continue;
          int xlo, xhi;
          valid_range(Wo, W, stride, kx - padding, xlo, xhi);
          for (int oy = 0; oy < Ho; ++oy) {
            const int iy = oy * stride + ky - padding;
            if (iy < 0 || iy >= H) continue;
            double* yrow = yo + static_cast<std::size_t>(oy) * Wo;
            const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(iy) * W + (kx - padding);
            if (stride == 1) {
              for (int ox = xlo; ox < xhi; ++ox) yrow[ox] += wv * xc[base + ox];
            } else {
              for (int ox = xlo; ox < xhi; ++ox) yrow[ox] += wv * xc[base + ox * stride];
            }
          }
        }
      }
    }
  }

  auto backward = [xi, wi, bi, stride, padding](Tape& tp, VarId self) {
    const Tensor& g = tp.upstream(self);
    const Tensor& x = tp.value(xi);
    const Tensor& w = tp.value(wi);
    const int C = x.channels(), H = x.height(), W = x.width();
    const int O = w.dim(0), K = w.dim(2);
    const int Ho = g.height(), Wo = g.width();
    if (bi >= 0 && tp.requires_grad(bi)) {
      Tensor& gb = tp.grad_buffer(bi);
      for (int o = 0; o < O; ++o) {
        const double* go = g.channel(o);
        double s = 0.0;
        for (int i = 0; i < Ho * Wo; ++i) s += go[i];
        gb[o] += s;
      }
    }
    const bool need_x = tp.requires_grad(xi);
    const bool need_w = tp.requires_grad(wi);
    Tensor* gx = need_x ? &tp.grad_buffer(xi) : nullptr;
    Tensor* gw = need_w ? &tp.grad_buffer(wi) : nullptr;
    for (int o = 0; o < O; ++o) {
      const double* go = g.channel(o);
      for (int c = 0; c < C; ++c) {
        const double* xc = x.channel(c);
        double* gxc = need_x ? gx->channel(c) : nullptr;
        for (int ky = 0; ky < K; ++ky) {
          for (int kx = 0; kx < K; ++kx) {
            const std::size_t widx = ((static_cast<std::size_t>(o) * C + c) * K + ky) * K + kx;
            const double wv = w[widx];
            int xlo, xhi;
            valid_range(Wo, W, stride, kx - padding, xlo, xhi);
            double acc = 0.0;
            for (int oy = 0; oy < Ho; ++oy) {
              const int iy = oy * stride + ky - padding;
              if (iy < 0 || iy >= H) continue;
              const double* grow = go + static_cast<std::size_t>(oy) * Wo;
              const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(iy) * W + (kx - padding);
              if (stride == 1) {
                for (int ox = xlo; ox < xhi; ++ox) acc += grow[ox] * xc[base + ox];
                if (gxc && wv != 0.0) {
                  for (int ox = xlo; ox < xhi; ++ox) gxc[base + ox] += wv * grow[ox];
                }
              } else {
                for (int ox = xlo; ox < xhi; ++ox) acc += grow[ox] * xc[base + ox * stride];
                if (gxc && wv != 0.0) {
                  for (int ox = xlo; ox < xhi; ++ox) gxc[base + ox * stride] += wv * grow[ox];
                }
              }
            }
            if (gw) (*gw)[widx] += acc;
          }
        }
      }
    }
  };
  if (bi >= 0) return t.record("conv2d", std::move(y), {xi, wi, bi}, backward);
  return t.record("conv2d", std::move(y), {xi, wi}, backward);
}

VarId gelu(Tape& t, VarId x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  constexpr double inv_sqrt2pi = 0.39894228040143267794;
  return unary(
      t, x, "gelu", [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
      [](double v, double) { return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * inv_sqrt2pi * std::exp(-0.5 * v * v); });
}

VarId sigmoid(Tape& t, VarId x) {
  return unary(
      t, x, "sigmoid", [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, [](double, double y) { return y * (1.0 - y); });
}

VarId square(Tape& t, VarId a) {
  return unary(t, a, "square", [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

VarId abs(Tape& t, VarId a) {
  return unary(
      t, a, "abs", [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

VarId clamp_min(Tape& t, VarId a, double lo) {
  return unary(
      t, a, "clamp_min", [lo](double v) { return std::max(v, lo); }, [lo](double v, double) { return v > lo ? 1.0 : 0.0; });
}

VarId pow_scalar(Tape& t, VarId a, double p) {
  return unary(
      t, a, "pow", [p](double v) { return std::pow(v, p); }, [p](double v, double) { return p * std::pow(v, p - 1.0); });
}

VarId scale(Tape& t, VarId a, double s) {
  return unary(t, a, "scale", [s](double v) { return s * v; }, [s](double, double) { return s; });
}

VarId add_scalar(Tape& t, VarId a, double s) {
  return unary(t, a, "add_scalar", [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

VarId pixel_shuffle(Tape& t, VarId xi, int r) {
  const Tensor& x = t.value(xi);
  require(x.rank() == 3 && x.channels() % (r * r) == 0, "pixel_shuffle channel count");
  const int C = x.channels() / (r * r), H = x.height(), W = x.width();
  Tensor y({C, H * r, W * r});
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) {
        const double* src = x.channel(c * r * r + i * r + j);
        for (int yy = 0; yy < H; ++yy)
          for (int xx = 0; xx < W; ++xx) y.at(c, yy * r + i, xx * r + j) = src[yy * W + xx];
      }
  return t.record("pixel_shuffle", std::move(y), {xi}, [xi, r](Tape& tp, VarId self) {
    const Tensor& g = tp.upstream(self);
    Tensor& gx = tp.grad_buffer(xi);
    const int C = g.channels(), H = g.height() / r, W = g.width() / r;
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) {
          double* dst = gx.channel(c * r * r + i * r + j);
          for (int yy = 0; yy < H; ++yy)
            for (int xx = 0; xx < W; ++xx) dst[yy * W + xx] += g.at(c, yy * r + i, xx * r + j);
        }
  });
}

VarId concat(Tape& t, VarId ai, VarId bi) {
  const Tensor& a = t.value(ai);
  const Tensor& b = t.value(bi);
  require(a.rank() == 3 && b.rank() == 3 && a.height() == b.height() && a.width() == b.width(),
          "concat spatial mismatch");
  Tensor y({a.channels() + b.channels(), a.height(), a.width()});
  std::copy(a.values().begin(), a.values().end(), y.values().begin());
  std::copy(b.values().begin(), b.values().end(), y.values().begin() + static_cast<std::ptrdiff_t>(a.numel()));
  return t.record("concat", std::move(y), {ai, bi}, [ai, bi](Tape& tp, VarId self) {
    const Tensor& g = tp.upstream(self);
    const std::size_t na = tp.value(ai).numel();
    if (tp.requires_grad(ai)) {
      Tensor& ga = tp.grad_buffer(ai);
      for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
    }
    if (tp.requires_grad(bi)) {
      Tensor& gb = tp.grad_buffer(bi);
      for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] += g[na + i];
    }
  });
}

VarId select_channels(Tape& t, VarId xi, std::span<const int> channels) {
  const Tensor& x = t.value(xi);
  const int H = x.height(), W = x.width();
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  std::vector<int> chans(channels.begin(), channels.end());
  Tensor y({static_cast<int>(chans.size()), H, W});
  for (std::size_t k = 0; k < chans.size(); ++k) {
    require(chans[k] >= 0 && chans[k] < x.channels(), "select_channels index");
    std::copy(x.channel(chans[k]), x.channel(chans[k]) + plane, y.channel(static_cast<int>(k)));
  }
  return t.record("select_channels", std::move(y), {xi}, [xi, chans, plane](Tape& tp, VarId self) {
    const Tensor& g = tp.upstream(self);
    Tensor& gx = tp.grad_buffer(xi);
    for (std::size_t k = 0; k < chans.size(); ++k) {
      const double* src = g.channel(static_cast<int>(k));
      double* dst = gx.channel(chans[k]);
      for (std::size_t i = 0; i < plane; ++i) dst[i] += src[i];
    }
  });
}

namespace {

template <class F, class GA, class GB>
VarId binary(Tape& t, VarId ai, VarId bi, std::string_view name, F f, GA da, GB db) {
  const Tensor& a = t.value(ai);
  const Tensor& b = t.value(bi);
  require(a.same_shape(b), "elementwise shape mismatch");
  Tensor y(a.dims());
  for (std::size_t i = 0; i < a.numel(); ++i) y[i] = f(a[i], b[i]);
  return t.record(name, std::move(y), {ai, bi}, [ai, bi, da, db](Tape& tp, VarId self) {
    const Tensor& g = tp.upstream(self);
    const Tensor& a = tp.value(ai);
    const Tensor& b = tp.value(bi);
    if (tp.requires_grad(ai)) {
      Tensor& ga = tp.grad_buffer(ai);
      for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * da(a[i], b[i]);
    }
    if (tp.requires_grad(bi)) {
      Tensor& gb = tp.grad_buffer(bi);
      for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * db(a[i], b[i]);
    }
  });
}

}  // namespace

VarId add(Tape& t, VarId a, VarId b) {
  return binary(
      t, a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

VarId sub(Tape& t, VarId a, VarId b) {
  return binary(
      t, a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

VarId mul(Tape& t, VarId a, VarId b) {
  return binary(
      t, a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

VarId div(Tape& t, VarId a, VarId b) {
  return binary(
      t, a, b, "div", [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

VarId sum(Tape& t, VarId ai) {
  const Tensor& a = t.value(ai);
  double s = 0.0;
  for (double v : a.values()) s += v;
  return t.record("sum", Tensor::scalar(s), {ai}, [ai](Tape& tp, VarId self) {
    const double g = tp.upstream(self).item();
    for (double& v : tp.grad_buffer(ai).values()) v += g;
  });
}

VarId mean(Tape& t, VarId a) {
  const auto n = static_cast<double>(t.value(a).numel());
  return scale(t, sum(t, a), 1.0 / n);
}

VarId filter1d_valid(Tape& t, VarId xi, std::span<const double> kernel, int axis) {
  const Tensor& x = t.value(xi);
  require(axis == 1 || axis == 2, "filter1d axis must be 1 (rows) or 2 (cols)");
  const int K = static_cast<int>(kernel.size());
  const int C = x.channels(), H = x.height(), W = x.width();
  const int Ho = axis == 1 ? H - K + 1 : H;
  const int Wo = axis == 2 ? W - K + 1 : W;
  require(Ho > 0 && Wo > 0, "filter1d input smaller than kernel");
  std::vector<double> k(kernel.begin(), kernel.end());
  Tensor y({C, Ho, Wo});
  for (int c = 0; c < C; ++c)
    for (int yy = 0; yy < Ho; ++yy)
      for (int xx = 0; xx < Wo; ++xx) {
        double s = 0.0;
        for (int j = 0; j < K; ++j) s += k[j] * (axis == 1 ? x.at(c, yy + j, xx) : x.at(c, yy, xx + j));
        y.at(c, yy, xx) = s;
      }
  return t.record("filter1d", std::move(y), {xi}, [xi, k, axis](Tape& tp, VarId self) {
    const Tensor& g = tp.upstream(self);
    Tensor& gx = tp.grad_buffer(xi);
    const int K = static_cast<int>(k.size());
    for (int c = 0; c < g.channels(); ++c)
      for (int yy = 0; yy < g.height(); ++yy)
        for (int xx = 0; xx < g.width(); ++xx) {
          const double gv = g.at(c, yy, xx);
          for (int j = 0; j < K; ++j) (axis == 1 ? gx.at(c, yy + j, xx) : gx.at(c, yy, xx + j)) += k[j] * gv;
        }
  });
}

VarId filter3x3_valid(Tape& t, VarId xi, std::span<const double> kernel) {
  require(kernel.size() == 9, "filter3x3 needs 9 weights");
  const Tensor& x = t.value(xi);
  const int C = x.channels(), Ho = x.height() - 2, Wo = x.width() - 2;
  require(Ho > 0 && Wo > 0, "filter3x3 input smaller than kernel");
  std::array<double, 9> k{};
  std::copy(kernel.begin(), kernel.end(), k.begin());
  Tensor y({C, Ho, Wo});
  for (int c = 0; c < C; ++c)
    for (int yy = 0; yy < Ho; ++yy)
      for (int xx = 0; xx < Wo; ++xx) {
        double s = 0.0;
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) s += k[a * 3 + b] * x.at(c, yy + a, xx + b);
        y.at(c, yy, xx) = s;
      }
  return t.record("filter3x3", std::move(y), {xi}, [xi, k](Tape& tp, VarId self) {
    const Tensor& g = tp.upstream(self);
    Tensor& gx = tp.grad_buffer(xi);
    for (int c = 0; c < g.channels(); ++c)
      for (int yy = 0; yy < g.height(); ++yy)
        for (int xx = 0; xx < g.width(); ++xx) {
          const double gv = g.at(c, yy, xx);
          for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) gx.at(c, yy + a, xx + b) += k[a * 3 + b] * gv;
        }
  });
}

VarId pad_replicate(Tape& t, VarId xi, int p) {
  const Tensor& x = t.value(xi);
  const int C = x.channels(), H = x.height(), W = x.width();
  Tensor y({C, H + 2 * p, W + 2 * p});
  for (int c = 0; c < C; ++c)
    for (int yy = 0; yy < H + 2 * p; ++yy)
      for (int xx = 0; xx < W + 2 * p; ++xx)
        y.at(c, yy, xx) = x.at(c, std::clamp(yy - p, 0, H - 1), std::clamp(xx - p, 0, W - 1));
  return t.record("pad_replicate", std::move(y), {xi}, [xi, p](Tape& tp, VarId self) {
    const Tensor& g = tp.upstream(self);
    Tensor& gx = tp.grad_buffer(xi);
    const int H = gx.height(), W = gx.width();
    for (int c = 0; c < g.channels(); ++c)
      for (int yy = 0; yy < g.height(); ++yy)
        for (int xx = 0; xx < g.width(); ++xx)
          gx.at(c, std::clamp(yy - p, 0, H - 1), std::clamp(xx - p, 0, W - 1)) += g.at(c, yy, xx);
  });
}

VarId avg_pool2(Tape& t, VarId xi) {
  const Tensor& x = t.value(xi);
  const int C = x.channels(), Ho = x.height() / 2, Wo = x.width() / 2;
  require(Ho > 0 && Wo > 0, "avg_pool2 input too small");
  Tensor y({C, Ho, Wo});
  for (int c = 0; c < C; ++c)
    for (int yy = 0; yy < Ho; ++yy)
      for (int xx = 0; xx < Wo; ++xx)
        y.at(c, yy, xx) = 0.25 * (x.at(c, 2 * yy, 2 * xx) + x.at(c, 2 * yy, 2 * xx + 1) + x.at(c, 2 * yy + 1, 2 * xx) +
                                  x.at(c, 2 * yy + 1, 2 * xx + 1));
  return t.record("avg_pool2", std::move(y), {xi}, [xi](Tape& tp, VarId self) {
    const Tensor& g = tp.upstream(self);
    Tensor& gx = tp.grad_buffer(xi);
    for (int c = 0; c < g.channels(); ++c)
      for (int yy = 0; yy < g.height(); ++yy)
        for (int xx = 0; xx < g.width(); ++xx) {
          const double v = 0.25 * g.at(c, yy, xx);
          gx.at(c, 2 * yy, 2 * xx) += v;
          gx.at(c, 2 * yy, 2 * xx + 1) += v;
          gx.at(c, 2 * yy + 1, 2 * xx) += v;
          gx.at(c, 2 * yy + 1, 2 * xx + 1) += v;
        }
  });
}

}  // namespace tiad::inpainter::ops
