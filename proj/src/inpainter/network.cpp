#include "tiad/inpainter/network.hpp"

#include <cmath>

#include "tiad/error.hpp"
#include "tiad/inpainter/ops.hpp"

namespace tiad::inpainter {
namespace {

std::string stage(int s) { return "encoder.s" + std::to_string(s); }
std::string level(const char* kind, int l) { return std::string("decoder.") + kind + std::to_string(l); }

void add_conv(ParamSet& p, const std::string& name, ParamGroup g, int out, int in, int k) {
  p.items.push_back({name + ".weight", g, Tensor({out, in, k, k})});
  p.items.push_back({name + ".bias", g, Tensor({out})});
}

ParamSet allocate(const NetworkConfig& cfg) {
  const int C = cfg.scale_channels;
  ParamSet p;
  add_conv(p, "adapter", ParamGroup::Backbone, cfg.adapter_out, cfg.in_channels, 1);
  for (int s = 0; s < cfg.num_scales; ++s) {
    add_conv(p, stage(s) + ".conv1", ParamGroup::Backbone, C, s == 0 ? cfg.adapter_out : C, 3);
    add_conv(p, stage(s) + ".conv2", ParamGroup::Backbone, C, C, 3);
  }
  for (int l = 0; l < cfg.num_scales; ++l) add_conv(p, level("lateral", l), ParamGroup::Head, C, C, 1);
  for (int l = 0; l + 1 < cfg.num_scales; ++l) add_conv(p, level("up", l), ParamGroup::Head, 4 * C, C, 1);
  for (int l = 0; l < cfg.num_scales; ++l) {
    const bool top = l + 1 == cfg.num_scales;
    add_conv(p, level("fuse", l), ParamGroup::Head, C, top ? C : 2 * C, 3);
  }
  for (int j = 0; j < 2; ++j) add_conv(p, level("final", j), ParamGroup::Head, 4 * C, C, 1);
  add_conv(p, "head", ParamGroup::Head, cfg.out_channels, C, 1);
  return p;
}

}  // namespace

void NetworkConfig::validate() const {
  if (in_channels != kDetectionFrames * kSpectralBands + 1) throw ShapeError("in_channels must be 37");
  if (num_scales != 5) throw ShapeError("num_scales must be 5");
  if (out_channels != kOutputBands) throw ShapeError("out_channels must be 4");
  if (adapter_out <= 0 || scale_channels <= 0) throw ShapeError("channel counts must be positive");
}

const Param& ParamSet::at(const std::string& name) const { return items.at(index_of(name)); }
Param& ParamSet::at(const std::string& name) { return items.at(index_of(name)); }

std::size_t ParamSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].name == name) return i;
  }
  throw ShapeError("no parameter named " + name);
}

std::size_t ParamSet::numel() const {
  std::size_t n = 0;
  for (const auto& p : items) n += p.value.numel();
  return n;
}

bool ParamSet::all_finite() const {
  for (const auto& p : items) {
    for (double v : p.value.values()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

bool operator==(const ParamSet& a, const ParamSet& b) {
  if (a.items.size() != b.items.size()) return false;
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    if (a.items[i].name != b.items[i].name || a.items[i].group != b.items[i].group ||
        !(a.items[i].value == b.items[i].value)) {
      return false;
    }
  }
  return true;
}

void adapter_init(ParamSet& params, const NetworkConfig& cfg) {
  Tensor& w = params.at("adapter.weight").value;
  std::fill(w.values().begin(), w.values().end(), 0.0);
  const int last = (kDetectionFrames - 1) * kSpectralBands;
  for (int c = 0; c < std::min(cfg.adapter_out, kSpectralBands); ++c) {
    w[static_cast<std::size_t>(c) * cfg.in_channels + last + c] = 1.0;
  }
  auto& b = params.at("adapter.bias").value.values();
  std::fill(b.begin(), b.end(), 0.0);
}

ParamSet init_params(const NetworkConfig& cfg, Rng& rng) {
  cfg.validate();
  ParamSet p = allocate(cfg);
  for (auto& item : p.items) {
    Tensor& v = item.value;
    if (v.rank() == 4) {
      const double fan_in = static_cast<double>(v.dim(1)) * v.dim(2) * v.dim(3);
      const double bound = std::sqrt(6.0 / fan_in);
      for (double& x : v.values()) x = rng.uniform(-bound, bound);
    }
  }
  adapter_init(p, cfg);
  return p;
}

ForwardResult forward(const ParamSet& params, const NetworkConfig& cfg, const Tensor& input, Tape& tape,
                      const ForwardOptions& options) {
  cfg.validate();
  if (input.rank() != 3 || input.channels() != cfg.in_channels) {
    throw ShapeError("network input must be {37,H,W}, got " + input.shape_string());
  }
  const int H = input.height(), W = input.width();
  if (H <= 0 || W <= 0 || H % NetworkConfig::kInputMultiple || W % NetworkConfig::kInputMultiple) {
    throw ShapeError("input size " + std::to_string(H) + "x" + std::to_string(W) + " not divisible by 64");
  }

  ForwardResult fr;
  fr.param_ids.reserve(params.size());
  for (const auto& p : params.items) {
    const bool frozen =
        !options.record_gradients || (options.freeze_backbone && p.group == ParamGroup::Backbone);
    fr.param_ids.push_back(frozen ? tape.constant(p.value) : tape.leaf(p.value));
  }
  auto id = [&](const std::string& name) { return fr.param_ids[params.index_of(name)]; };
  auto conv = [&](VarId x, const std::string& name, int stride, int pad) {
    return ops::conv2d(tape, x, id(name + ".weight"), id(name + ".bias"), stride, pad);
  };

  const VarId x = tape.constant(input);
  fr.adapter_output = conv(x, "adapter", 1, 0);

  VarId f = fr.adapter_output;
  for (int s = 0; s < cfg.num_scales; ++s) {
    f = ops::gelu(tape, conv(f, stage(s) + ".conv1", NetworkConfig::kStageStrides[s], 1));
    f = ops::gelu(tape, conv(f, stage(s) + ".conv2", 1, 1));
    fr.encoder_levels.push_back(f);
  }

  std::vector<VarId> dec(cfg.num_scales);
  const int top = cfg.num_scales - 1;
  dec[top] = ops::gelu(tape, conv(conv(fr.encoder_levels[top], level("lateral", top), 1, 0), level("fuse", top), 1, 1));
  for (int l = top - 1; l >= 0; --l) {
    const VarId up = ops::gelu(tape, ops::pixel_shuffle(tape, conv(dec[l + 1], level("up", l), 1, 0), 2));
    const VarId lat = conv(fr.encoder_levels[l], level("lateral", l), 1, 0);
    dec[l] = ops::gelu(tape, conv(ops::concat(tape, lat, up), level("fuse", l), 1, 1));
  }
  fr.decoder_levels = dec;

  VarId u = dec[0];
  for (int j = 0; j < 2; ++j) {
    u = ops::gelu(tape, ops::pixel_shuffle(tape, conv(u, level("final", j), 1, 0), 2));
  }
  fr.output = ops::sigmoid(tape, conv(u, "head", 1, 0));
  return fr;
}

Gradients collect_gradients(const Tape& tape, const ForwardResult& fr) {
  Gradients g;
  g.reserve(fr.param_ids.size());
  for (VarId id : fr.param_ids) g.push_back(tape.grad(id));
  return g;
}

Tensor build_input(const TimeCube& cube, const BoolGrid& mask) {
  cube.validate_for_detection();
  const int H = cube.height(), W = cube.width();
  if (mask.height() != H || mask.width() != W) throw ShapeError("mask shape differs from cube");
  Tensor x({kDetectionFrames * kSpectralBands + 1, H, W});
  for (int t = 0; t < kDetectionFrames; ++t) {
    const bool target = t == kDetectionFrames - 1;
    for (int b = 0; b < kSpectralBands; ++b) {
      const Band& band = cube.frames[t].bands[b];
      double* dst = x.channel(t * kSpectralBands + b);
      for (std::size_t i = 0; i < band.size(); ++i) dst[i] = (target && mask[i]) ? 0.0 : band[i];
    }
  }
  double* m = x.channel(kDetectionFrames * kSpectralBands);
  for (std::size_t i = 0; i < mask.size(); ++i) m[i] = mask[i] ? 1.0 : 0.0;
  return x;
}

Tensor target_tensor(const TimeCube& cube) {
  const int H = cube.height(), W = cube.width();
  Tensor y({kOutputBands, H, W});
  const auto& idx = output_band_indices();
  for (int k = 0; k < kOutputBands; ++k) {
    const Band& band = cube.target().bands[idx[k]];
    std::copy(band.begin(), band.end(), y.channel(k));
  }
  return y;
}

Tensor mask_tensor(const BoolGrid& mask, int channels) {
  Tensor m({channels, mask.height(), mask.width()});
  for (int c = 0; c < channels; ++c) {
    double* dst = m.channel(c);
    for (std::size_t i = 0; i < mask.size(); ++i) dst[i] = mask[i] ? 1.0 : 0.0;
  }
  return m;
}

OutputStack predict_masked(const ParamSet& params, const NetworkConfig& cfg, const TimeCube& cube,
                           const BoolGrid& mask) {
  const Tensor input = build_input(cube, mask);
  Tape tape;
  const ForwardResult fr = forward(params, cfg, input, tape, {.record_gradients = false});
  const Tensor& y = tape.value(fr.output);
  OutputStack out;
  for (int k = 0; k < kOutputBands; ++k) {
    out[k] = Band(y.height(), y.width());
    const double* src = y.channel(k);
    for (std::size_t i = 0; i < out[k].size(); ++i) out[k][i] = static_cast<float>(src[i]);
  }
  return out;
}

}  // namespace tiad::inpainter
