#include "tiad/inpainter/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "tiad/container.hpp"
#include "tiad/error.hpp"
#include "tiad/log.hpp"
#include "tiad/parallel.hpp"

namespace tiad::inpainter {

void TrainConfig::validate() const {
  if (epochs < 0 || warmup_epochs < 0) throw ShapeError("epoch counts must be non-negative");
  if (!(warmup_lr > 0 && backbone_lr > 0 && head_lr > 0)) throw ShapeError("learning rates must be positive");
  if (!(weight_decay >= 0)) throw ShapeError("weight decay must be non-negative");
  if (!(clip_norm > 0)) throw ShapeError("clip_norm must be positive");
  if (!(ema_decay > 0 && ema_decay < 1)) throw ShapeError("ema_decay must lie in (0,1)");
  if (batch_size < 1 || steps_per_epoch < 1) throw ShapeError("batch size and steps must be positive");
  if (!(epoch_sample_fraction > 0 && epoch_sample_fraction <= 1)) throw ShapeError("sample fraction in (0,1]");
  if (validation_cubes < 1) throw ShapeError("need at least one validation cube");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"warmup_epochs", warmup_epochs},
          {"warmup_lr", warmup_lr},
          {"backbone_lr", backbone_lr},
          {"head_lr", head_lr},
          {"weight_decay", weight_decay},
          {"clip_norm", clip_norm},
          {"ema_decay", ema_decay},
          {"batch_size", batch_size},
          {"steps_per_epoch", steps_per_epoch},
          {"epoch_sample_fraction", epoch_sample_fraction},
          {"seed", seed},
          {"validation_cubes", validation_cubes},
          {"lambda_ssim_max", loss.lambda_ssim_max},
          {"lambda_hf_max", loss.lambda_hf_max},
          {"ramp_epochs", loss.ramp_epochs}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
  c.warmup_lr = j.value("warmup_lr", c.warmup_lr);
  c.backbone_lr = j.value("backbone_lr", c.backbone_lr);
  c.head_lr = j.value("head_lr", c.head_lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.ema_decay = j.value("ema_decay", c.ema_decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
  c.epoch_sample_fraction = j.value("epoch_sample_fraction", c.epoch_sample_fraction);
  c.seed = j.value("seed", c.seed);
  c.validation_cubes = j.value("validation_cubes", c.validation_cubes);
  c.loss.lambda_ssim_max = j.value("lambda_ssim_max", c.loss.lambda_ssim_max);
  c.loss.lambda_hf_max = j.value("lambda_hf_max", c.loss.lambda_hf_max);
  c.loss.ramp_epochs = j.value("ramp_epochs", c.loss.ramp_epochs);
  return c;
}

nlohmann::json to_json(const NetworkConfig& c) {
  return {{"in_channels", c.in_channels},
          {"adapter_out", c.adapter_out},
          {"scale_channels", c.scale_channels},
          {"num_scales", c.num_scales},
          {"out_channels", c.out_channels}};
}

NetworkConfig network_config_from_json(const nlohmann::json& j) {
  NetworkConfig c;
  c.in_channels = j.at("in_channels").get<int>();
  c.adapter_out = j.at("adapter_out").get<int>();
  c.scale_channels = j.at("scale_channels").get<int>();
  c.num_scales = j.at("num_scales").get<int>();
  c.out_channels = j.at("out_channels").get<int>();
  return c;
}

namespace {

// Adds a shape if it keeps coverage within the cap; otherwise retries smaller.
template <class Paint>
void paint_shape(BoolGrid& mask, std::size_t& covered, std::size_t cap, double size, Paint paint) {
  for (double s = size; s >= 0.5; s *= 0.5) {
    BoolGrid trial = mask;
    std::size_t n = covered;
    paint(trial, n, s);
    if (n <= cap) {
      mask = std::move(trial);
      covered = n;
      return;
    }
  }
}

void paint_disc(BoolGrid& m, std::size_t& n, double cy, double cx, double radius) {
  const int r0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
  const int r1 = std::min(m.height() - 1, static_cast<int>(std::ceil(cy + radius)));
  const int c0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
  const int c1 = std::min(m.width() - 1, static_cast<int>(std::ceil(cx + radius)));
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) {
      const double dy = r - cy, dx = c - cx;
      if (dy * dy + dx * dx <= radius * radius && !m(r, c)) {
        m(r, c) = 1;
        ++n;
      }
    }
}

}  // namespace

BoolGrid sample_training_mask(Rng& rng, int height, int width) {
  const std::size_t total = static_cast<std::size_t>(height) * width;
  const double target = rng.uniform(kMinMaskCoverage, kMaxTargetCoverage);
  const auto need = static_cast<std::size_t>(std::ceil(target * static_cast<double>(total)));
  const auto cap = static_cast<std::size_t>(std::floor(kMaxMaskCoverage * static_cast<double>(total)));
  BoolGrid mask(height, width, 0);
  std::size_t covered = 0;

  while (covered < need) {
    if (rng.uniform() < 0.5) {
      const double rh = rng.uniform(height / 16.0, height / 2.0);
      const double rw = rng.uniform(width / 16.0, width / 2.0);
      const double top = rng.uniform(0.0, height - 1.0), left = rng.uniform(0.0, width - 1.0);
      paint_shape(mask, covered, cap, 1.0, [&](BoolGrid& m, std::size_t& n, double s) {
        const int r1 = std::min(height, static_cast<int>(top + std::max(1.0, rh * s)));
        const int c1 = std::min(width, static_cast<int>(left + std::max(1.0, rw * s)));
        for (int r = static_cast<int>(top); r < r1; ++r)
          for (int c = static_cast<int>(left); c < c1; ++c)
            if (!m(r, c)) {
              m(r, c) = 1;
              ++n;
            }
      });
    } else {
      const double radius = rng.uniform(4.0, 16.0);
      const auto steps = rng.uniform_int(8, 40);
      double y = rng.uniform(0.0, height - 1.0), x = rng.uniform(0.0, width - 1.0);
      double heading = rng.uniform(0.0, 2 * 3.14159265358979323846);
      for (std::int64_t k = 0; k < steps && covered < need; ++k) {
        paint_shape(mask, covered, cap, radius,
                    [&](BoolGrid& m, std::size_t& n, double s) { paint_disc(m, n, y, x, s); });
        heading += rng.uniform(-0.8, 0.8);
        const double len = rng.uniform(0.5, 1.5) * radius;
        y = std::clamp(y + len * std::sin(heading), 0.0, height - 1.0);
        x = std::clamp(x + len * std::cos(heading), 0.0, width - 1.0);
      }
    }
  }
  return mask;
}

TrainState init_train_state(const NetworkConfig& net, const TrainConfig& cfg) {
  Rng rng = Rng::derive(cfg.seed, 0x1417);
  TrainState s;
  s.params = init_params(net, rng);
  s.ema = s.params;
  s.adam = AdamState::zeros_like(s.params);
  return s;
}

std::vector<BoolGrid> validation_masks(const std::vector<TimeCube>& cubes, std::uint64_t seed) {
  std::vector<BoolGrid> masks;
  for (std::size_t i = 0; i < cubes.size(); ++i) {
    Rng rng = Rng::derive(seed ^ 0x5A17DA7Aull, i);
    masks.push_back(sample_training_mask(rng, cubes[i].height(), cubes[i].width()));
  }
  return masks;
}

double validation_l1(const ParamSet& params, const NetworkConfig& net, const std::vector<TimeCube>& cubes,
                     const std::vector<BoolGrid>& masks) {
  std::vector<double> per(cubes.size());
  parallel_for(cubes.size(), [&](std::size_t i) {
    Tape tape;
    const auto fr = forward(params, net, build_input(cubes[i], masks[i]), tape, {.record_gradients = false});
    const VarId target = tape.constant(target_tensor(cubes[i]));
    const VarId mask = tape.constant(mask_tensor(masks[i], kOutputBands));
    per[i] = tape.value(loss_l1(tape, fr.output, target, mask)).item();
  });
  double s = 0.0;
  for (double v : per) s += v;
  return cubes.empty() ? 0.0 : s / static_cast<double>(cubes.size());
}

CorpusSplit split_corpus(std::vector<TimeCube> cubes, const TrainConfig& cfg) {
  if (cubes.size() < 2) throw EmptyCorpus("need at least two cubes to hold out validation data");
  const std::size_t nval =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(cfg.validation_cubes), cubes.size() / 5));
  CorpusSplit split;
  split.validation.assign(std::make_move_iterator(cubes.end() - static_cast<std::ptrdiff_t>(nval)),
                          std::make_move_iterator(cubes.end()));
  cubes.resize(cubes.size() - nval);
  split.train = std::move(cubes);
  if (split.train.size() < static_cast<std::size_t>(cfg.batch_size)) {
    throw EmptyCorpus("training split has " + std::to_string(split.train.size()) + " cubes, batch size is " +
                      std::to_string(cfg.batch_size));
  }
  return split;
}

TrainState train(const std::vector<TimeCube>& train_set, const std::vector<TimeCube>& val_set,
                 const NetworkConfig& net, const TrainConfig& cfg, TrainState state, const StepHook& on_step,
                 const EpochHook& on_epoch) {
  cfg.validate();
  if (train_set.size() < static_cast<std::size_t>(cfg.batch_size)) {
    throw EmptyCorpus("corpus has " + std::to_string(train_set.size()) + " cubes, batch size is " +
                      std::to_string(cfg.batch_size));
  }
  if (val_set.empty()) throw EmptyCorpus("no validation cubes");
  const auto vmasks = validation_masks(val_set, cfg.seed);

  if (state.epoch == 0 && state.log.empty()) {
    EpochMetrics init{0, "init", std::nan(""), validation_l1(state.params, net, val_set, vmasks), 0.0, 0.0};
    state.log.push_back(init);
    if (on_epoch) on_epoch(state, init);
  }

  const std::size_t n = train_set.size();
  const std::size_t subset_size = std::min(
      n, std::max<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                               static_cast<std::size_t>(std::llround(cfg.epoch_sample_fraction * static_cast<double>(n)))));
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = state.epoch + 1; epoch <= cfg.epochs; ++epoch) {
    const bool warmup = epoch <= cfg.warmup_epochs;
    const int finetune_epoch = epoch - cfg.warmup_epochs - 1;
    const auto lambdas = cfg.loss.at(finetune_epoch, warmup);
    const GroupRates rates = warmup ? GroupRates{0.0, cfg.warmup_lr} : GroupRates{cfg.backbone_lr, cfg.head_lr};
    Rng rng = Rng::derive(cfg.seed, static_cast<std::uint64_t>(epoch));

    // Partial Fisher–Yates: this epoch's file sample.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < subset_size; ++i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(n - 1)));
      std::swap(order[i], order[j]);
    }
    order.resize(subset_size);

    double loss_sum = 0.0;
    for (int step = 1; step <= cfg.steps_per_epoch; ++step) {
      std::vector<std::size_t> picks(bs);
      std::vector<Rng> sample_rngs;
      for (std::size_t b = 0; b < bs; ++b) {
        picks[b] = order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(subset_size) - 1))];
        sample_rngs.push_back(Rng::derive(rng.next_u64(), b));
      }
      std::vector<Gradients> sample_grads(bs);
      std::vector<double> sample_loss(bs);
      parallel_for(bs, [&](std::size_t b) {
        const TimeCube& cube = train_set[picks[b]];
        const BoolGrid mask = sample_training_mask(sample_rngs[b], cube.height(), cube.width());
        Tape tape;
        const auto fr = forward(state.params, net, build_input(cube, mask), tape, {.freeze_backbone = warmup});
        const VarId target = tape.constant(target_tensor(cube));
        const VarId m = tape.constant(mask_tensor(mask, kOutputBands));
        const auto loss = combined_loss(tape, fr.output, target, m, cfg.loss, finetune_epoch, warmup);
        sample_loss[b] = tape.value(loss.total).item();
        tape.backward(loss.total);
        sample_grads[b] = collect_gradients(tape, fr);
      });

      // Fixed-order batch mean.
      Gradients grads = std::move(sample_grads[0]);
      double batch_loss = sample_loss[0];
      for (std::size_t b = 1; b < bs; ++b) {
        batch_loss += sample_loss[b];
        for (std::size_t k = 0; k < grads.size(); ++k) {
          for (std::size_t i = 0; i < grads[k].numel(); ++i) grads[k][i] += sample_grads[b][k][i];
        }
      }
      const double inv = 1.0 / static_cast<double>(bs);
      for (Tensor& g : grads)
        for (double& v : g.values()) v *= inv;
      batch_loss *= inv;

      const double norm = clip_grad_norm(grads, cfg.clip_norm);
      adamw_step(state.params, grads, state.adam, rates, cfg.weight_decay);
      ema_update(state.ema, state.params, cfg.ema_decay);
      loss_sum += batch_loss;
      if (on_step) on_step(StepInfo{epoch, step, warmup, batch_loss, norm, &state});
    }

    state.epoch = epoch;
    EpochMetrics row{epoch,
                     warmup ? "warmup" : "finetune",
                     loss_sum / cfg.steps_per_epoch,
                     validation_l1(state.params, net, val_set, vmasks),
                     lambdas.ssim,
                     lambdas.hf};
    state.log.push_back(row);
    log::info("epoch ", epoch, " ", row.phase, " train_loss=", row.train_loss, " val_l1=", row.val_l1);
    if (on_epoch) on_epoch(state, row);
  }
  return state;
}

std::string metrics_csv(const std::vector<EpochMetrics>& log) {
  std::ostringstream os;
  os << "epoch,phase,train_loss,val_l1,lambda_ssim,lambda_hf\n";
  char buf[256];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.phase.c_str(), r.train_loss, r.val_l1,
                  r.lambda_ssim, r.lambda_hf);
    os << buf;
  }
  return os.str();
}

namespace {

void write_tensor(std::ostream& os, const Tensor& t) {
  std::vector<float> f(t.numel());
  std::transform(t.values().begin(), t.values().end(), f.begin(), [](double v) { return static_cast<float>(v); });
  io::write_f32(os, f);
}

Tensor read_tensor(std::istream& is, const std::vector<int>& dims) {
  Tensor t(dims);
  std::vector<float> f(t.numel());
  io::read_f32(is, f);
  std::copy(f.begin(), f.end(), t.values().begin());
  return t;
}

const char* group_name(ParamGroup g) { return g == ParamGroup::Backbone ? "backbone" : "head"; }

}  // namespace

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json hdr;
  hdr["network"] = to_json(ckpt.network);
  hdr["train_config"] = ckpt.train_config;
  hdr["epoch"] = ckpt.epoch;
  hdr["seed"] = ckpt.seed;
  hdr["kind"] = ckpt.kind;
  auto& tensors = hdr["tensors"] = nlohmann::json::array();
  for (const auto& p : ckpt.params.items) {
    tensors.push_back({{"name", p.name}, {"group", group_name(p.group)}, {"dims", p.value.dims()}});
  }
  hdr["optimizer"] = ckpt.adam.has_value();
  if (ckpt.adam) hdr["adam_steps"] = ckpt.adam->steps;

  auto os = io::open_for_write(path);
  io::write_header(os, "TIADCKPT", kCheckpointFormatVersion, hdr);
  for (const auto& p : ckpt.params.items) write_tensor(os, p.value);
  if (ckpt.adam) {
    for (const auto& m : ckpt.adam->m) write_tensor(os, m);
    for (const auto& v : ckpt.adam->v) write_tensor(os, v);
  }
  if (!os) throw FormatError("write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  auto is = io::open_for_read(path);
  const auto hdr = io::read_header(is, "TIADCKPT", kCheckpointFormatVersion);
  Checkpoint c;
  std::vector<std::vector<int>> shapes;
  bool has_opt = false;
  try {
    c.network = network_config_from_json(hdr.at("network"));
    c.train_config = hdr.at("train_config");
    c.epoch = hdr.at("epoch").get<int>();
    c.seed = hdr.at("seed").get<std::uint64_t>();
    c.kind = hdr.at("kind").get<std::string>();
    for (const auto& t : hdr.at("tensors")) {
      const auto group = t.at("group").get<std::string>() == "backbone" ? ParamGroup::Backbone : ParamGroup::Head;
      shapes.push_back(t.at("dims").get<std::vector<int>>());
      c.params.items.push_back({t.at("name").get<std::string>(), group, Tensor()});
    }
    has_opt = hdr.at("optimizer").get<bool>();
    if (has_opt) {
      c.adam.emplace();
      c.adam->steps = hdr.at("adam_steps").get<std::vector<std::int64_t>>();
      if (c.adam->steps.size() != shapes.size()) throw FormatError("optimizer step count mismatch");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt checkpoint header: ") + e.what());
  }
  for (const auto& s : shapes) {
    for (int d : s) {
      if (d <= 0 || d > 1 << 16) throw FormatError("implausible tensor dimension");
    }
  }
  for (std::size_t k = 0; k < shapes.size(); ++k) c.params.items[k].value = read_tensor(is, shapes[k]);
  if (has_opt) {
    for (const auto& s : shapes) c.adam->m.push_back(read_tensor(is, s));
    for (const auto& s : shapes) c.adam->v.push_back(read_tensor(is, s));
  }
  io::expect_eof(is);

  // Shapes must match what this build allocates for the stored config.
  Rng dummy(0);
  const ParamSet reference = init_params(c.network, dummy);
  if (reference.size() != c.params.size()) throw FormatError("checkpoint tensor count mismatch");
  for (std::size_t k = 0; k < reference.size(); ++k) {
    if (reference.items[k].name != c.params.items[k].name ||
        reference.items[k].value.dims() != c.params.items[k].value.dims()) {
      throw FormatError("checkpoint tensor " + c.params.items[k].name + " does not match the network layout");
    }
  }
  return c;
}

}  // namespace tiad::inpainter
