#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "tiad/error.hpp"
#include "tiad/synthlab.hpp"

namespace tiad::synthlab {

namespace {

void check_inputs(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  if (scores.size() != truth.size()) throw ShapeError("scores and truth differ in length");
  for (double s : scores) {
    if (!std::isfinite(s)) throw ShapeError("non-finite score");
  }
}

// Tie blocks in descending score order: (positives, negatives) per block.
std::vector<std::pair<std::size_t, std::size_t>> blocks_descending(std::span<const double> scores,
                                                                    std::span<const std::uint8_t> truth) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i, pos = 0, neg = 0;
    for (; j < idx.size() && scores[idx[j]] == scores[idx[i]]; ++j) (truth[idx[j]] ? pos : neg)++;
    out.emplace_back(pos, neg);
    i = j;
  }
  return out;
}

std::size_t positives(std::span<const std::uint8_t> truth) {
  return static_cast<std::size_t>(std::count_if(truth.begin(), truth.end(), [](std::uint8_t t) { return t != 0; }));
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  check_inputs(scores, truth);
  const std::size_t p = positives(truth), n = truth.size() - p;
  if (p == 0 || n == 0) throw SingleClass("ROC-AUC needs positives and negatives");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Midranks are half-integers, so twice the rank sum stays an exact integer.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const std::uint64_t twice_mid = i + 1 + j;  // ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (truth[idx[k]]) twice_rank_sum += twice_mid;
    }
    i = j;
  }
  const double u = (static_cast<double>(twice_rank_sum) - static_cast<double>(p) * static_cast<double>(p + 1)) / 2.0;
  return u / (static_cast<double>(p) * static_cast<double>(n));
}

double pr_auc(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  check_inputs(scores, truth);
  const std::size_t p = positives(truth);
  if (p == 0) throw NoPositives("average precision needs at least one positive");
  double ap = 0.0;
  std::size_t tp = 0, fp = 0;
  for (const auto& [bp, bn] : blocks_descending(scores, truth)) {
    tp += bp;
    fp += bn;
    if (bp) ap += static_cast<double>(tp) / static_cast<double>(tp + fp) * static_cast<double>(bp) / static_cast<double>(p);
  }
  return ap;
}

double best_f1(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  check_inputs(scores, truth);
  const std::size_t p = positives(truth);
  if (p == 0) throw NoPositives("F1 needs at least one positive");
  double best = 0.0;
  std::size_t tp = 0, fp = 0;
  for (const auto& [bp, bn] : blocks_descending(scores, truth)) {
    tp += bp;
    fp += bn;
    best = std::max(best, 2.0 * static_cast<double>(tp) / static_cast<double>(tp + fp + p));
  }
  return best;
}

std::vector<CurvePoint> roc_curve(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  check_inputs(scores, truth);
  const std::size_t p = positives(truth), n = truth.size() - p;
  if (p == 0 || n == 0) throw SingleClass("ROC curve needs positives and negatives");
  std::vector<CurvePoint> pts{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (const auto& [bp, bn] : blocks_descending(scores, truth)) {
    tp += bp;
    fp += bn;
    pts.push_back({static_cast<double>(fp) / static_cast<double>(n), static_cast<double>(tp) / static_cast<double>(p)});
  }
  return pts;
}

std::vector<CurvePoint> pr_curve(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  check_inputs(scores, truth);
  const std::size_t p = positives(truth);
  if (p == 0) throw NoPositives("PR curve needs at least one positive");
  std::vector<CurvePoint> pts;
  std::size_t tp = 0, fp = 0;
  for (const auto& [bp, bn] : blocks_descending(scores, truth)) {
    tp += bp;
    fp += bn;
    pts.push_back({static_cast<double>(tp) / static_cast<double>(p), static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  return pts;
}

std::string IntensityBin::label() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g-%.3g", lo, hi);
  return buf;
}

const std::vector<IntensityBin>& default_bins() {
  static const std::vector<IntensityBin> bins = {
      {0.003, 0.05}, {0.05, 0.10}, {0.10, 0.15}, {0.15, 0.20}, {0.20, 0.25}};
  return bins;
}

std::optional<Stat> summarize(std::span<const std::optional<double>> values) {
  Stat s;
  double sum = 0.0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++s.n;
    }
  }
  if (s.n == 0) return std::nullopt;
  s.mean = sum / static_cast<double>(s.n);
  double ss = 0.0;
  for (const auto& v : values) {
    if (v) ss += (*v - s.mean) * (*v - s.mean);
  }
  s.std = std::sqrt(ss / static_cast<double>(s.n));
  return s;
}

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::RocAuc: return "roc_auc";
    case Metric::PrAuc: return "pr_auc";
    case Metric::BestF1: return "best_f1";
  }
  return "?";
}

std::vector<const SampleResult*> MetricsReport::select(std::optional<AnomalyKind> kind,
                                                       std::optional<std::size_t> bin) const {
  std::vector<const SampleResult*> out;
  for (const auto& s : samples) {
    if ((!kind || s.kind == *kind) && (!bin || s.bin == *bin)) out.push_back(&s);
  }
  return out;
}

namespace {

std::optional<double> metric_of(const SampleMetrics& m, Metric metric) {
  switch (metric) {
    case Metric::RocAuc: return m.roc_auc;
    case Metric::PrAuc: return m.pr_auc;
    case Metric::BestF1: return m.best_f1;
  }
  return std::nullopt;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::optional<Stat> MetricsReport::stat(std::size_t method, Metric metric, std::optional<AnomalyKind> kind,
                                        std::optional<std::size_t> bin) const {
  std::vector<std::optional<double>> vals;
  for (const SampleResult* s : select(kind, bin)) vals.push_back(metric_of(s->per_method.at(method), metric));
  return summarize(vals);
}

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os << "method,kind,bin,metric,mean,std,n,n_defined\n";
  auto row = [&](std::size_t m, std::optional<AnomalyKind> kind, std::optional<std::size_t> bin) {
    const std::size_t n = select(kind, bin).size();
    for (Metric metric : kAllMetrics) {
      const auto st = stat(m, metric, kind, bin);
      os << methods[m] << ',' << (kind ? std::string(kind_name(*kind)) : "all") << ','
         << (bin ? bins[*bin].label() : "all") << ',' << metric_name(metric) << ','
         << (st ? fmt(st->mean) : "") << ',' << (st ? fmt(st->std) : "") << ',' << n << ','
         << (st ? st->n : 0) << '\n';
    }
  };
  for (std::size_t m = 0; m < methods.size(); ++m) {
    for (AnomalyKind k : kinds)
      for (std::size_t b = 0; b < bins.size(); ++b) row(m, k, b);
    for (std::size_t b = 0; b < bins.size(); ++b) row(m, std::nullopt, b);
    row(m, std::nullopt, std::nullopt);
  }
  return os.str();
}

std::string MetricsReport::samples_csv() const {
  std::ostringstream os;
  os << "index,cube,kind,bin,intensity,positives,region_pixels,method,roc_auc,pr_auc,best_f1\n";
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
  for (const auto& s : samples) {
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const auto& pm = s.per_method[m];
      os << s.index << ',' << s.cube_index << ',' << kind_name(s.kind) << ',' << bins[s.bin].label() << ','
         << fmt(s.intensity) << ',' << s.positives << ',' << s.region_pixels << ',' << methods[m] << ','
         << opt(pm.roc_auc) << ',' << opt(pm.pr_auc) << ',' << opt(pm.best_f1) << '\n';
    }
  }
  return os.str();
}

std::vector<SweepRow> intensity_sweep(const MetricsReport& report) {
  std::vector<SweepRow> rows;
  for (std::size_t m = 0; m < report.methods.size(); ++m) {
    for (std::size_t b = 0; b < report.bins.size(); ++b) {
      rows.push_back({report.methods[m], report.bins[b], report.stat(m, Metric::RocAuc, std::nullopt, b)});
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "method,bin_lo,bin_hi,roc_auc_mean,roc_auc_std,n\n";
  for (const auto& r : rows) {
    os << r.method << ',' << fmt(r.bin.lo) << ',' << fmt(r.bin.hi) << ',' << (r.roc_auc ? fmt(r.roc_auc->mean) : "")
       << ',' << (r.roc_auc ? fmt(r.roc_auc->std) : "") << ',' << (r.roc_auc ? r.roc_auc->n : 0) << '\n';
  }
  return os.str();
}

}  // namespace tiad::synthlab
