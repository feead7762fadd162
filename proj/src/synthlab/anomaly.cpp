#include <algorithm>
#include <cmath>

#include "tiad/error.hpp"
#include "tiad/synthlab.hpp"

namespace tiad::synthlab {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::string_view kind_name(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::Brightness: return "brightness";
    case AnomalyKind::Darkening: return "darkening";
    case AnomalyKind::Texture: return "texture";
    case AnomalyKind::SpectralShift: return "spectral_shift";
    case AnomalyKind::Vegetation: return "vegetation";
  }
  return "?";
}

AnomalyKind kind_from_name(std::string_view name) {
  for (AnomalyKind k : kAllKinds) {
    if (kind_name(k) == name) return k;
  }
  throw ShapeError("unknown anomaly kind '" + std::string(name) + "'");
}

void AnomalySpec::validate() const {
  if (!(intensity == 0.0 || (intensity >= kMinIntensity && intensity <= kMaxIntensity))) {
    throw ShapeError("anomaly intensity " + std::to_string(intensity) + " outside [0.003, 0.25]");
  }
  if (!(radius > 0.0) || !std::isfinite(center_row) || !std::isfinite(center_col)) {
    throw ShapeError("anomaly disc needs a finite centre and positive radius");
  }
}

double local_dynamic_range(const Frame& frame, const EvalMask& mask) {
  if (!mask.provenance.same_shape(frame.scl)) throw ShapeError("mask and frame shapes differ");
  std::vector<double> means;
  for (std::size_t i = 0; i < frame.scl.size(); ++i) {
    if (!mask.valid(i)) continue;
    double s = 0.0;
    for (const Band& b : frame.bands) s += b[i];
    means.push_back(s / kSpectralBands);
  }
  if (means.size() < 2) throw EmptyMask("dynamic range needs at least two valid pixels");
  std::vector<double> copy = means;
  const double hi = detectors::percentile(means, 0.99);
  const double lo = detectors::percentile(copy, 0.01);
  return hi - lo;
}

double anomaly_radius(std::size_t valid_area) {
  return std::sqrt(kAnomalyAreaFraction * static_cast<double>(valid_area) / kPi);
}

std::pair<int, int> place_disc(Rng& rng, int height, int width, double radius, double container_row,
                               double container_col, double container_radius) {
  const double slack = container_radius - radius;
  std::vector<std::pair<int, int>> candidates;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double dr = r - container_row, dc = c - container_col;
      if (dr * dr + dc * dc > slack * slack || slack < 0) continue;
      if (r - radius < -0.5 || c - radius < -0.5 || r + radius > height - 0.5 || c + radius > width - 0.5) continue;
      candidates.emplace_back(r, c);
    }
  }
  if (candidates.empty()) {
    throw GeometryError("no position fits a disc of radius " + std::to_string(radius) + " inside radius " +
                        std::to_string(container_radius));
  }
  return candidates[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(candidates.size()) - 1))];
}

Grid<double> gaussian_blur(const Grid<double>& g, double sigma) {
  const int rad = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * rad + 1);
  double ks = 0.0;
  for (int i = -rad; i <= rad; ++i) ks += k[i + rad] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= ks;
  const int h = g.height(), w = g.width();
  auto reflect = [](int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n - 2;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
  };
  Grid<double> tmp(h, w), out(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double s = 0.0;
      for (int i = -rad; i <= rad; ++i) s += k[i + rad] * g(r, reflect(c + i, w));
      tmp(r, c) = s;
    }
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double s = 0.0;
      for (int i = -rad; i <= rad; ++i) s += k[i + rad] * tmp(reflect(r + i, h), c);
      out(r, c) = s;
    }
  return out;
}

namespace {

// Standard deviation of unit white noise after gaussian_blur (interior pixels).
double blur_noise_std(double sigma) {
  const int rad = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  double ks = 0.0, k2 = 0.0;
  for (int i = -rad; i <= rad; ++i) ks += std::exp(-0.5 * i * i / (sigma * sigma));
  for (int i = -rad; i <= rad; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma)) / ks;
    k2 += v * v;
  }
  return k2;  // variance is (Σk²)² for the separable 2-D kernel
}

}  // namespace

Injection inject_anomaly(const Frame& frame, const EvalMask& mask, const AnomalySpec& spec) {
  spec.validate();
  const int h = frame.height(), w = frame.width();
  if (!mask.provenance.same_shape(frame.scl)) throw ShapeError("mask and frame shapes differ");
  if (spec.center_row - spec.radius < -0.5 || spec.center_col - spec.radius < -0.5 ||
      spec.center_row + spec.radius > h - 0.5 || spec.center_col + spec.radius > w - 0.5) {
    throw GeometryError("anomaly disc leaves the frame");
  }
  Injection out{frame, detectors::disc_mask(h, w, spec.center_row, spec.center_col, spec.radius)};
  for (std::size_t i = 0; i < out.truth.size(); ++i) {
    if (!mask.valid(i)) out.truth[i] = 0;
  }
  if (count_true(out.truth) == 0) throw GeometryError("anomaly disc covers no valid pixel");
  if (spec.intensity == 0.0) return out;

  const double s = spec.intensity * local_dynamic_range(frame, mask);
  std::array<double, kSpectralBands> offset{};
  const auto& ob = output_band_indices();  // B04, B03, B02, B08
  switch (spec.kind) {
    case AnomalyKind::Brightness: offset.fill(s); break;
    case AnomalyKind::Darkening: offset.fill(-s); break;
    case AnomalyKind::SpectralShift: {
      constexpr double weights[kOutputBands] = {1.0, -0.5, 0.5, -1.0};
      for (int k = 0; k < kOutputBands; ++k) offset[ob[k]] = s * weights[k];
      break;
    }
    case AnomalyKind::Vegetation:
      offset[ob[3]] = s;
      for (int k = 0; k < 3; ++k) offset[ob[k]] = -0.5 * s;
      break;
    case AnomalyKind::Texture: break;
  }

  Grid<double> noise;
  if (spec.kind == AnomalyKind::Texture) {
    Rng rng(spec.seed);
    Grid<double> white(h, w);
    for (double& v : white) v = rng.normal();
    noise = gaussian_blur(white, kTextureSigmaPx);
    const double scale = s / blur_noise_std(kTextureSigmaPx);
    for (double& v : noise) v *= scale;
  }

  for (std::size_t i = 0; i < out.truth.size(); ++i) {
    if (!out.truth[i]) continue;
    for (int b = 0; b < kSpectralBands; ++b) {
      const double add = spec.kind == AnomalyKind::Texture ? noise[i] : offset[b];
      out.frame.bands[b][i] = static_cast<float>(std::clamp(out.frame.bands[b][i] + add, 0.0, 1.0));
    }
  }
  return out;
}

}  // namespace tiad::synthlab
