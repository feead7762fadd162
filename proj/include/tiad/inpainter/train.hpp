#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tiad/inpainter/losses.hpp"
#include "tiad/inpainter/network.hpp"
#include "tiad/inpainter/optim.hpp"

namespace tiad::inpainter {

/// Defaults are the full-scale recipe; desk-scale runs override epochs and
/// steps_per_epoch.
struct TrainConfig {
  int epochs = 500;
  int warmup_epochs = 5;
  double warmup_lr = 1e-3;
  double backbone_lr = 5e-5;
  double head_lr = 1e-4;
  double weight_decay = 1e-2;
  double clip_norm = 1.0;
  double ema_decay = 0.995;
  int batch_size = 4;
  int steps_per_epoch = 1000;
  double epoch_sample_fraction = 0.01;
  std::uint64_t seed = 0;
  /// Cubes held out from the end of the corpus for per-epoch validation.
  int validation_cubes = 16;
  LossWeights loss;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

nlohmann::json to_json(const NetworkConfig& c);
NetworkConfig network_config_from_json(const nlohmann::json& j);

struct EpochMetrics {
  int epoch = 0;
  std::string phase;  // "init", "warmup" or "finetune"
  double train_loss = 0.0;
  double val_l1 = 0.0;
  double lambda_ssim = 0.0;
  double lambda_hf = 0.0;
};

struct TrainState {
  ParamSet params;
  ParamSet ema;
  AdamState adam;
  int epoch = 0;  // completed epochs
  std::vector<EpochMetrics> log;
};

/// Union of rectangles and disc-brush strokes grown until coverage reaches a
/// target drawn from [0.05, 0.40]; shapes are shrunk so coverage never passes 0.45.
BoolGrid sample_training_mask(Rng& rng, int height, int width);

inline constexpr double kMinMaskCoverage = 0.05;
inline constexpr double kMaxTargetCoverage = 0.40;
inline constexpr double kMaxMaskCoverage = 0.45;

/// Fresh parameters (seeded from cfg.seed), a copy as EMA and zeroed optimizer state.
TrainState init_train_state(const NetworkConfig& net, const TrainConfig& cfg);

/// Deterministic validation masks, one per cube.
std::vector<BoolGrid> validation_masks(const std::vector<TimeCube>& cubes, std::uint64_t seed);

/// Mean masked L1 over the validation cubes.
double validation_l1(const ParamSet& params, const NetworkConfig& net, const std::vector<TimeCube>& cubes,
                     const std::vector<BoolGrid>& masks);

struct StepInfo {
  int epoch = 0;  // 1-based
  int step = 0;
  bool warmup = false;
  double loss = 0.0;
  double grad_norm = 0.0;
  const TrainState* state = nullptr;
};
using StepHook = std::function<void(const StepInfo&)>;
using EpochHook = std::function<void(const TrainState&, const EpochMetrics&)>;

struct CorpusSplit {
  std::vector<TimeCube> train;
  std::vector<TimeCube> validation;
};
/// Holds out the last min(validation_cubes, N/5) cubes (at least one). Throws EmptyCorpus.
CorpusSplit split_corpus(std::vector<TimeCube> cubes, const TrainConfig& cfg);

/// Runs epochs state.epoch+1 .. cfg.epochs. Epochs 1..warmup_epochs train the
/// head at warmup_lr with the backbone frozen; later epochs train both groups
/// at their own rates. An "init" row is logged first on a fresh state.
/// Throws EmptyCorpus when fewer than batch_size training cubes exist.
TrainState train(const std::vector<TimeCube>& train_set, const std::vector<TimeCube>& val_set,
                 const NetworkConfig& net, const TrainConfig& cfg, TrainState state, const StepHook& on_step = {},
                 const EpochHook& on_epoch = {});

/// CSV: epoch,phase,train_loss,val_l1,lambda_ssim,lambda_hf
std::string metrics_csv(const std::vector<EpochMetrics>& log);

struct Checkpoint {
  NetworkConfig network;
  nlohmann::json train_config;
  int epoch = 0;
  std::uint64_t seed = 0;
  std::string kind;  // "raw" or "ema"
  ParamSet params;
  /// Present in raw checkpoints written for resumption.
  std::optional<AdamState> adam;
};

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws FormatError.
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace tiad::inpainter
