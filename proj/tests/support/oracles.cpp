#include "oracles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "tiad/inpainter/losses.hpp"
#include "tiad/inpainter/ops.hpp"

namespace tiad::testing {

using namespace inpainter;

Tensor random_tensor(Rng& rng, std::vector<int> dims, double lo, double hi) {
  Tensor t(std::move(dims));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

GradCheck check_gradient(const Expr& expr, const std::vector<Tensor>& inputs, std::uint64_t seed,
                         std::size_t max_entries, double h, std::size_t wrt) {
  wrt = std::min(wrt, inputs.size());
  // Projection weights fixed by the output shape of one evaluation.
  auto evaluate = [&](const std::vector<Tensor>& in, Tape& t) {
    std::vector<VarId> ids;
    for (std::size_t k = 0; k < in.size(); ++k) ids.push_back(k < wrt ? t.leaf(in[k]) : t.constant(in[k]));
    return std::pair{ids, expr(t, ids)};
  };
  Tape probe;
  const auto [probe_ids, probe_out] = evaluate(inputs, probe);
  Rng rng(seed);
  Tensor proj(probe.value(probe_out).dims());
  for (double& v : proj.values()) v = rng.normal();

  auto objective = [&](const std::vector<Tensor>& in) {
    Tape t;
    const auto out = evaluate(in, t).second;
    const Tensor& y = t.value(out);
    double s = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) s += y[i] * proj[i];
    return s;
  };

  Tape t;
  const auto [ids, out] = evaluate(inputs, t);
  t.backward(out, proj);

  GradCheck result;
  for (std::size_t k = 0; k < wrt; ++k) {
    const Tensor analytic = t.grad(ids[k]);
    std::vector<std::size_t> coords(inputs[k].numel());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (coords.size() > max_entries) {
      for (std::size_t i = 0; i < max_entries; ++i) {
        std::swap(coords[i], coords[i + static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(coords.size() - i - 1)))]);
      }
      coords.resize(max_entries);
    }
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i : coords) {
      std::vector<Tensor> plus = inputs, minus = inputs;
      plus[k][i] += h;
      minus[k][i] -= h;
      const double numeric = (objective(plus) - objective(minus)) / (2.0 * h);
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
    }
    result.entries += coords.size();
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
    result.rel_error = std::max(result.rel_error, std::sqrt(diff2) / denom);
  }
  return result;
}

namespace {

constexpr int S = 16;

Tensor away_from_zero(Rng& rng, std::vector<int> dims, double lo, double hi, double gap) {
  Tensor t = random_tensor(rng, std::move(dims), lo, hi);
  for (double& v : t.values()) v = v < 0 ? v - gap : v + gap;
  return t;
}

Tensor binary_mask(Rng& rng, int c, double p) {
  Tensor m({c, S, S});
  for (double& v : m.values()) v = rng.uniform() < p ? 1.0 : 0.0;
  m[0] = 1.0;
  return m;
}

// Edge-replicated 5-point Laplacian, written independently of the ops.
Tensor laplacian(const Tensor& x) {
  Tensor out(x.dims());
  const int h = x.height(), w = x.width();
  for (int c = 0; c < x.channels(); ++c)
    for (int r = 0; r < h; ++r)
      for (int q = 0; q < w; ++q) {
        auto at = [&](int rr, int qq) { return x.at(c, std::clamp(rr, 0, h - 1), std::clamp(qq, 0, w - 1)); };
        out.at(c, r, q) = at(r - 1, q) + at(r + 1, q) + at(r, q - 1) + at(r, q + 1) - 4.0 * at(r, q);
      }
  return out;
}

// Prediction/target pair whose pixel and Laplacian differences all stay clear
// of zero, so |·| is differentiable under the finite-difference step.
std::pair<Tensor, Tensor> smooth_pair(Rng& rng, int channels) {
  for (;;) {
    Tensor target({channels, S, S});
    for (int c = 0; c < channels; ++c) {
      const double fx = rng.uniform(0.1, 0.6), fy = rng.uniform(0.1, 0.6), ph = rng.uniform(0, 6.28);
      for (int r = 0; r < S; ++r)
        for (int q = 0; q < S; ++q) {
          target.at(c, r, q) = 0.5 + 0.25 * std::sin(fx * q + fy * r + ph) + rng.uniform(-0.05, 0.05);
        }
    }
    Tensor pred = target;
    for (double& v : pred.values()) v += (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.01, 0.08);
    const Tensor lp = laplacian(pred), lt = laplacian(target);
    bool ok = true;
    for (std::size_t i = 0; i < lp.numel() && ok; ++i) ok = std::abs(lp[i] - lt[i]) > 1e-4;
    if (ok) return {pred, target};
  }
}

std::vector<double> gaussian_taps(int n, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(n));
  double s = 0;
  for (int i = 0; i < n; ++i) s += k[static_cast<std::size_t>(i)] = std::exp(-0.5 * std::pow((i - (n - 1) / 2.0) / sigma, 2));
  for (double& v : k) v /= s;
  return k;
}

}  // namespace

std::vector<GradCase> primitive_cases() {
  std::vector<GradCase> cases;
  auto conv = [](int cin, int cout, int k, int stride, int pad, bool bias) {
    return GradCase{
        "conv2d " + std::to_string(k) + "x" + std::to_string(k) + " s" + std::to_string(stride) + " p" +
            std::to_string(pad) + (bias ? " +bias" : ""),
        [=](Rng& r) {
          std::vector<Tensor> in{random_tensor(r, {cin, S, S}), random_tensor(r, {cout, cin, k, k})};
          if (bias) in.push_back(random_tensor(r, {cout}));
          return in;
        },
        [=](Tape& t, const std::vector<VarId>& v) { return ops::conv2d(t, v[0], v[1], bias ? v[2] : -1, stride, pad); }};
  };
  cases.push_back(conv(3, 4, 3, 1, 1, true));
  cases.push_back(conv(3, 4, 3, 2, 1, true));
  cases.push_back(conv(5, 2, 1, 1, 0, false));
  cases.push_back(conv(2, 3, 3, 1, 0, true));
  cases.push_back(conv(2, 2, 3, 2, 0, false));

  auto unary = [](std::string name, double lo, double hi, VarId (*f)(Tape&, VarId)) {
    return GradCase{std::move(name), [=](Rng& r) { return std::vector<Tensor>{random_tensor(r, {3, S, S}, lo, hi)}; },
                    [=](Tape& t, const std::vector<VarId>& v) { return f(t, v[0]); }};
  };
  cases.push_back(unary("gelu", -3, 3, ops::gelu));
  cases.push_back(unary("sigmoid", -4, 4, ops::sigmoid));
  cases.push_back(unary("square", -2, 2, ops::square));
  cases.push_back(unary("sum", -1, 1, ops::sum));
  cases.push_back(unary("mean", -1, 1, ops::mean));
  cases.push_back(unary("avg_pool2", -1, 1, ops::avg_pool2));
  cases.push_back({"avg_pool2 odd", [](Rng& r) { return std::vector<Tensor>{random_tensor(r, {2, S - 1, S - 1})}; },
                   [](Tape& t, const std::vector<VarId>& v) { return ops::avg_pool2(t, v[0]); }});
  cases.push_back({"abs", [](Rng& r) { return std::vector<Tensor>{away_from_zero(r, {3, S, S}, -1, 1, 0.01)}; },
                   [](Tape& t, const std::vector<VarId>& v) { return ops::abs(t, v[0]); }});
  cases.push_back({"clamp_min", [](Rng& r) { return std::vector<Tensor>{away_from_zero(r, {3, S, S}, -1, 1, 0.01)}; },
                   [](Tape& t, const std::vector<VarId>& v) { return ops::clamp_min(t, v[0], 0.0); }});
  cases.push_back({"pow_scalar", [](Rng& r) { return std::vector<Tensor>{random_tensor(r, {3, S, S}, 0.2, 2.0)}; },
                   [](Tape& t, const std::vector<VarId>& v) { return ops::pow_scalar(t, v[0], 0.7); }});
  cases.push_back({"scale", [](Rng& r) { return std::vector<Tensor>{random_tensor(r, {3, S, S})}; },
                   [](Tape& t, const std::vector<VarId>& v) { return ops::scale(t, v[0], -2.5); }});
  cases.push_back({"add_scalar", [](Rng& r) { return std::vector<Tensor>{random_tensor(r, {3, S, S})}; },
                   [](Tape& t, const std::vector<VarId>& v) { return ops::add_scalar(t, v[0], 0.3); }});

  auto binary = [](std::string name, double lo, double hi, VarId (*f)(Tape&, VarId, VarId)) {
    return GradCase{std::move(name),
                    [=](Rng& r) {
                      return std::vector<Tensor>{random_tensor(r, {3, S, S}, -1, 1), random_tensor(r, {3, S, S}, lo, hi)};
                    },
                    [=](Tape& t, const std::vector<VarId>& v) { return f(t, v[0], v[1]); }};
  };
  cases.push_back(binary("add", -1, 1, ops::add));
  cases.push_back(binary("sub", -1, 1, ops::sub));
  cases.push_back(binary("mul", -1, 1, ops::mul));
  cases.push_back(binary("div", 0.5, 2.0, ops::div));

  cases.push_back({"pixel_shuffle", [](Rng& r) { return std::vector<Tensor>{random_tensor(r, {8, S, S})}; },
                   [](Tape& t, const std::vector<VarId>& v) { return ops::pixel_shuffle(t, v[0], 2); }});
  cases.push_back({"concat",
                   [](Rng& r) { return std::vector<Tensor>{random_tensor(r, {2, S, S}), random_tensor(r, {3, S, S})}; },
                   [](Tape& t, const std::vector<VarId>& v) { return ops::concat(t, v[0], v[1]); }});
  cases.push_back({"select_channels", [](Rng& r) { return std::vector<Tensor>{random_tensor(r, {4, S, S})}; },
                   [](Tape& t, const std::vector<VarId>& v) {
                     const int ch[] = {2, 0, 2};
                     return ops::select_channels(t, v[0], ch);
                   }});
  for (int axis : {1, 2}) {
    cases.push_back({"filter1d_valid axis " + std::to_string(axis),
                     [](Rng& r) { return std::vector<Tensor>{random_tensor(r, {3, S, S})}; },
                     [axis](Tape& t, const std::vector<VarId>& v) {
                       const auto k = gaussian_taps(5, 1.5);
                       return ops::filter1d_valid(t, v[0], k, axis);
                     }});
  }
  cases.push_back({"filter3x3_valid", [](Rng& r) { return std::vector<Tensor>{random_tensor(r, {3, S, S})}; },
                   [](Tape& t, const std::vector<VarId>& v) {
                     const double k[9] = {0.1, -0.7, 0.3, 1.2, -4.0, 0.5, 0.0, 0.9, -0.2};
                     return ops::filter3x3_valid(t, v[0], k);
                   }});
  for (int p : {1, 2}) {
    cases.push_back({"pad_replicate " + std::to_string(p),
                     [](Rng& r) { return std::vector<Tensor>{random_tensor(r, {2, S, S})}; },
                     [p](Tape& t, const std::vector<VarId>& v) { return ops::pad_replicate(t, v[0], p); }});
  }
  return cases;
}

std::vector<GradCase> loss_cases() {
  std::vector<GradCase> cases;
  auto with_pair = [](int channels) {
    return [channels](Rng& r) {
      auto [pred, target] = smooth_pair(r, channels);
      return std::vector<Tensor>{pred, target, binary_mask(r, channels, 0.4)};
    };
  };
  auto pred_only = [](auto body) {
    return [body](Tape& t, const std::vector<VarId>& v) { return body(t, v[0], v[1], v[2]); };
  };
  cases.push_back({"loss_l1", with_pair(4), pred_only([](Tape& t, VarId p, VarId y, VarId m) { return loss_l1(t, p, y, m); })});
  cases.push_back({"loss_ms_ssim", with_pair(3),
                   pred_only([](Tape& t, VarId p, VarId y, VarId) { return loss_ms_ssim(t, p, y); })});
  cases.push_back({"loss_hf", with_pair(4), pred_only([](Tape& t, VarId p, VarId y, VarId m) { return loss_hf(t, p, y, m); })});
  cases.push_back({"combined warmup", with_pair(4), pred_only([](Tape& t, VarId p, VarId y, VarId m) {
                     return combined_loss(t, p, y, m, LossWeights{}, 0, true).total;
                   })});
  cases.push_back({"combined fine-tune epoch 60", with_pair(4), pred_only([](Tape& t, VarId p, VarId y, VarId m) {
                     return combined_loss(t, p, y, m, LossWeights{}, 60, false).total;
                   })});
  cases.push_back({"combined fine-tune epoch 150", with_pair(4), pred_only([](Tape& t, VarId p, VarId y, VarId m) {
                     return combined_loss(t, p, y, m, LossWeights{}, 150, false).total;
                   })});
  // Only the prediction is differentiated; target and mask are constants.
  for (auto& c : cases) c.wrt = 1;
  return cases;
}

GradCheck check_case(const GradCase& c, std::uint64_t fixture_seed, std::size_t max_entries) {
  Rng rng = Rng::derive(fixture_seed, 0x6AD);
  const auto inputs = c.make_inputs(rng);
  return check_gradient(c.expr, inputs, Rng::splitmix64(fixture_seed), max_entries, 1e-6, c.wrt);
}

double roc_auc_pairwise(std::span<const double> s, std::span<const std::uint8_t> y) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      ++pairs;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  return wins / static_cast<double>(pairs);
}

namespace {

struct Counts {
  double tp = 0, fp = 0;
};

Counts at_threshold(std::span<const double> s, std::span<const std::uint8_t> y, double tau) {
  Counts c;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] >= tau) (y[i] ? c.tp : c.fp) += 1;
  }
  return c;
}

std::vector<double> thresholds_descending(std::span<const double> s) {
  std::set<double, std::greater<>> uniq(s.begin(), s.end());
  return {uniq.begin(), uniq.end()};
}

}  // namespace

double pr_auc_threshold_sweep(std::span<const double> s, std::span<const std::uint8_t> y) {
  const double p = static_cast<double>(std::count(y.begin(), y.end(), 1));
  double ap = 0.0, prev_recall = 0.0;
  for (double tau : thresholds_descending(s)) {
    const Counts c = at_threshold(s, y, tau);
    const double recall = c.tp / p;
    ap += (recall - prev_recall) * (c.tp / (c.tp + c.fp));
    prev_recall = recall;
  }
  return ap;
}

double best_f1_threshold_sweep(std::span<const double> s, std::span<const std::uint8_t> y) {
  const double p = static_cast<double>(std::count(y.begin(), y.end(), 1));
  double best = 0.0;
  for (double tau : thresholds_descending(s)) {
    const Counts c = at_threshold(s, y, tau);
    const double precision = c.tp / (c.tp + c.fp), recall = c.tp / p;
    if (precision + recall > 0) best = std::max(best, 2 * precision * recall / (precision + recall));
  }
  return best;
}

void random_metric_instance(Rng& rng, std::vector<double>& s, std::vector<std::uint8_t>& y) {
  const auto n = static_cast<std::size_t>(rng.uniform_int(2, 64));
  s.assign(n, 0.0);
  y.assign(n, 0);
  // Quantised scores force ties; a few exact duplicates are added on top.
  const int levels = static_cast<int>(rng.uniform_int(2, 40));
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = std::floor(rng.uniform() * levels) / levels + (rng.uniform() < 0.3 ? 0.0 : rng.uniform() * 1e-3);
    y[i] = rng.uniform() < 0.35 ? 1 : 0;
  }
  for (std::size_t k = 0; k < n / 4; ++k) {
    s[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1))] =
        s[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1))];
  }
  y[0] = 1;
  y[1] = 0;
}

std::vector<double> rx_dense_inverse(const std::vector<std::array<double, 4>>& px, double ridge_factor) {
  constexpr int C = 4;
  const double n = static_cast<double>(px.size());
  std::array<double, C> mu{};
  for (const auto& p : px)
    for (int b = 0; b < C; ++b) mu[b] += p[b] / n;
  double cov[C][C] = {};
  for (const auto& p : px)
    for (int a = 0; a < C; ++a)
      for (int b = 0; b < C; ++b) cov[a][b] += (p[a] - mu[a]) * (p[b] - mu[b]) / (n - 1);
  double trace = 0;
  for (int a = 0; a < C; ++a) trace += cov[a][a];
  const double ridge = trace > 0 ? ridge_factor * trace / C : 1.0;
  // Gauss–Jordan on [Σ + ridge·I | I].
  double m[C][2 * C] = {};
  for (int a = 0; a < C; ++a) {
    for (int b = 0; b < C; ++b) m[a][b] = cov[a][b] + (a == b ? ridge : 0.0);
    m[a][C + a] = 1.0;
  }
  for (int col = 0; col < C; ++col) {
    int piv = col;
    for (int r = col + 1; r < C; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    }
    for (int k = 0; k < 2 * C; ++k) std::swap(m[col][k], m[piv][k]);
    const double d = m[col][col];
    for (int k = 0; k < 2 * C; ++k) m[col][k] /= d;
    for (int r = 0; r < C; ++r) {
      if (r == col) continue;
      const double f = m[r][col];
      for (int k = 0; k < 2 * C; ++k) m[r][k] -= f * m[col][k];
    }
  }
  std::vector<double> out;
  for (const auto& p : px) {
    double q = 0;
    for (int a = 0; a < C; ++a)
      for (int b = 0; b < C; ++b) q += (p[a] - mu[a]) * m[a][C + b] * (p[b] - mu[b]);
    out.push_back(std::sqrt(std::max(0.0, q)));
  }
  return out;
}

TimeCube random_cube(Rng& rng, int height, int width, int frames) {
  TimeCube cube;
  for (int t = 0; t < frames; ++t) {
    Frame f;
    f.meta.acquisition_time = 1672531200 + static_cast<UtcSeconds>(t) * 5 * 86400 + 36000;
    f.meta.center_lat = 10.0;
    f.meta.center_lon = 20.0;
    f.meta.scene_id = "rand" + std::to_string(t);
    f.scl = SclGrid(height, width, 4);
    for (auto& b : f.bands) {
      b = Band(height, width);
      for (float& v : b) v = static_cast<float>(rng.uniform(0.01, 1.0));
    }
    cube.frames.push_back(std::move(f));
  }
  return cube;
}

double median3_sorted(double a, double b, double c) {
  std::array<double, 3> v{a, b, c};
  std::sort(v.begin(), v.end());
  return v[1];
}

}  // namespace tiad::testing
