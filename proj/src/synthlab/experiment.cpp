#include <algorithm>
#include <cmath>

#include "tiad/error.hpp"
#include "tiad/parallel.hpp"
#include "tiad/synthlab.hpp"

namespace tiad::synthlab {

void ExperimentConfig::validate() const {
  if (kinds.empty()) throw ShapeError("no anomaly kinds selected");
  if (n_samples < kinds.size()) {
    throw ShapeError("n_samples must be at least the number of kinds (" + std::to_string(kinds.size()) + ")");
  }
  if (!(intensity_lo <= intensity_hi) || intensity_lo < 0.0 || intensity_hi > kMaxIntensity) {
    throw ShapeError("intensity range must satisfy 0 <= lo <= hi <= 0.25");
  }
  if (intensity_lo > 0.0 && intensity_lo < kMinIntensity) throw ShapeError("non-zero intensities start at 0.003");
  if (curve_points < 2) throw ShapeError("curve_points must be at least 2");
}

namespace {

std::vector<IntensityBin> active_bins(double lo, double hi) {
  std::vector<IntensityBin> out;
  for (const auto& b : default_bins()) {
    const bool overlap = std::min(hi, b.hi) > std::max(lo, b.lo);
    const bool point = lo == hi && b.contains(lo);
    if (overlap || (point && out.empty())) out.push_back(b);
  }
  if (out.empty()) out.push_back({lo, hi});
  return out;
}

// Mean-curve samples: TPR at each FPR grid value (upper envelope of the polyline).
std::vector<double> resample_roc(const std::vector<CurvePoint>& pts, int n) {
  std::vector<double> y(static_cast<std::size_t>(n), 0.0);
  for (int g = 0; g < n; ++g) {
    const double x = static_cast<double>(g) / (n - 1);
    double best = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const auto& a = pts[i];
      const auto& b = pts[i + 1];
      if (x < a.x || x > b.x) continue;
      const double v = b.x > a.x ? a.y + (b.y - a.y) * (x - a.x) / (b.x - a.x) : b.y;
      best = std::max(best, v);
    }
    y[static_cast<std::size_t>(g)] = best;
  }
  return y;
}

// Interpolated precision: best precision at recall >= r.
std::vector<double> resample_pr(const std::vector<CurvePoint>& pts, int n) {
  std::vector<double> y(static_cast<std::size_t>(n), 0.0);
  for (int g = 0; g < n; ++g) {
    const double r = static_cast<double>(g) / (n - 1);
    double best = 0.0;
    for (const auto& p : pts) {
      if (p.x >= r - 1e-12) best = std::max(best, p.y);
    }
    y[static_cast<std::size_t>(g)] = best;
  }
  return y;
}

struct SampleWork {
  SampleResult result;
  std::vector<std::optional<std::vector<double>>> roc;  // per method
  std::vector<std::optional<std::vector<double>>> pr;
};

}  // namespace

MetricsReport run_experiment(const std::vector<TimeCube>& corpus, const std::vector<DetectorMethod>& methods,
                             const ExperimentConfig& config) {
  config.validate();
  if (corpus.empty()) throw EmptyCorpus("experiment corpus is empty");
  if (methods.empty()) throw ShapeError("no detection methods given");

  MetricsReport report;
  for (const auto& m : methods) report.methods.push_back(m.id);
  report.kinds = config.kinds;
  report.bins = active_bins(config.intensity_lo, config.intensity_hi);
  const std::size_t nk = config.kinds.size(), nb = report.bins.size();

  std::vector<SampleWork> work(config.n_samples);
  parallel_for(config.n_samples, [&](std::size_t i) {
    Rng rng = Rng::derive(config.seed, i);
    SampleResult& s = work[i].result;
    s.index = i;
    s.kind = config.kinds[i % nk];
    s.bin = (i / nk) % nb;
    s.cube_index = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(corpus.size()) - 1));
    const IntensityBin& bin = report.bins[s.bin];
    const double lo = std::max(bin.lo, config.intensity_lo), hi = std::min(bin.hi, config.intensity_hi);
    s.intensity = hi > lo ? rng.uniform(lo, hi) : lo;

    const TimeCube& cube = corpus[s.cube_index];
    cube.validate_for_detection();
    const int h = cube.height(), w = cube.width();
    const EvalMask eval = maskgen::eval_mask_for_target(cube);
    const BoolGrid inpaint = detectors::centered_target_mask(h, w);
    for (std::size_t p = 0; p < inpaint.size(); ++p) {
      if (inpaint[p] && eval.valid(p)) ++s.region_pixels;
    }
    if (s.region_pixels < 2) throw EmptyMask("cube " + std::to_string(s.cube_index) + " has no valid target region");

    AnomalySpec spec;
    spec.kind = s.kind;
    spec.intensity = s.intensity;
    spec.radius = anomaly_radius(s.region_pixels);
    const auto [cr, cc] = place_disc(rng, h, w, spec.radius, (h - 1) / 2.0, (w - 1) / 2.0,
                                     detectors::target_mask_radius(std::min(h, w)));
    spec.center_row = cr;
    spec.center_col = cc;
    spec.seed = rng.next_u64();
    Injection inj = inject_anomaly(cube.target(), eval, spec);
    TimeCube perturbed = cube;
    perturbed.frames.back() = std::move(inj.frame);

    work[i].roc.resize(methods.size());
    work[i].pr.resize(methods.size());
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const auto map = detectors::score_target(perturbed, eval, inpaint, methods[m].predictor);
      std::vector<double> scores;
      std::vector<std::uint8_t> labels;
      for (std::size_t p = 0; p < map.scores.size(); ++p) {
        if (!map.mask.valid(p)) continue;
        scores.push_back(map.scores[p]);
        labels.push_back(s.intensity > 0.0 && inj.truth[p] ? 1 : 0);
      }
      if (m == 0) s.positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
      SampleMetrics sm;
      const bool has_pos = s.positives > 0, has_neg = s.positives < labels.size();
      if (has_pos) {
        sm.pr_auc = pr_auc(scores, labels);
        sm.best_f1 = best_f1(scores, labels);
        work[i].pr[m] = resample_pr(pr_curve(scores, labels), config.curve_points);
      }
      if (has_pos && has_neg) {
        sm.roc_auc = roc_auc(scores, labels);
        work[i].roc[m] = resample_roc(roc_curve(scores, labels), config.curve_points);
      }
      s.per_method.push_back(sm);
    }
  });

  const auto n = static_cast<std::size_t>(config.curve_points);
  for (std::size_t m = 0; m < methods.size(); ++m) {
    std::vector<double> roc(n, 0.0), pr(n, 0.0);
    std::size_t nroc = 0, npr = 0;
    for (const auto& wk : work) {
      if (wk.roc[m]) {
        for (std::size_t g = 0; g < n; ++g) roc[g] += (*wk.roc[m])[g];
        ++nroc;
      }
      if (wk.pr[m]) {
        for (std::size_t g = 0; g < n; ++g) pr[g] += (*wk.pr[m])[g];
        ++npr;
      }
    }
    std::vector<CurvePoint> mr, mp;
    for (std::size_t g = 0; nroc && g < n; ++g) mr.push_back({static_cast<double>(g) / (n - 1), roc[g] / nroc});
    for (std::size_t g = 0; npr && g < n; ++g) mp.push_back({static_cast<double>(g) / (n - 1), pr[g] / npr});
    report.mean_roc.push_back(std::move(mr));
    report.mean_pr.push_back(std::move(mp));
  }
  for (auto& wk : work) report.samples.push_back(std::move(wk.result));
  return report;
}

}  // namespace tiad::synthlab
