#pragma once

#include <array>
#include <string>
#include <vector>

#include "tiad/datacube.hpp"
#include "tiad/detectors.hpp"
#include "tiad/inpainter/tape.hpp"
#include "tiad/rng.hpp"

namespace tiad::inpainter {

struct NetworkConfig {
  int in_channels = kDetectionFrames * kSpectralBands + 1;  // 37
  int adapter_out = kSpectralBands;
  int scale_channels = 32;  // 128 at full fidelity
  int num_scales = 5;
  int out_channels = kOutputBands;

  /// Spatial size must be divisible by this (stride of the coarsest level).
  static constexpr int kInputMultiple = 64;
  /// Stride of each encoder stage relative to its input.
  static constexpr std::array<int, 5> kStageStrides = {4, 2, 2, 2, 2};

  void validate() const;
  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

enum class ParamGroup { Backbone, Head };

struct Param {
  std::string name;
  ParamGroup group;
  Tensor value;
};

/// Network parameters in a fixed order. Backbone = adapter + encoder,
/// head = FPN decoder + output projection.
struct ParamSet {
  std::vector<Param> items;

  std::size_t size() const { return items.size(); }
  const Param& at(const std::string& name) const;
  Param& at(const std::string& name);
  std::size_t index_of(const std::string& name) const;
  std::size_t numel() const;
  bool all_finite() const;

  friend bool operator==(const ParamSet& a, const ParamSet& b);
};

/// Gradients aligned with ParamSet::items.
using Gradients = std::vector<Tensor>;

/// 1×1 adapter weights that copy band c of the last frame (input channel 27+c)
/// to output channel c; everything else zero.
void adapter_init(ParamSet& params, const NetworkConfig& config);

/// Fan-in scaled uniform initialisation for all tensors, then adapter_init.
ParamSet init_params(const NetworkConfig& config, Rng& rng);

struct ForwardResult {
  VarId output = -1;                   // {4, H, W} in (0, 1)
  VarId adapter_output = -1;           // {adapter_out, H, W}
  std::vector<VarId> encoder_levels;   // strides 4 .. 64
  std::vector<VarId> decoder_levels;   // strides 4 .. 64
  std::vector<VarId> param_ids;        // aligned with ParamSet::items
};

struct ForwardOptions {
  /// Record backbone tensors as constants so no gradient is formed for them.
  bool freeze_backbone = false;
  /// False for inference: every parameter is a constant.
  bool record_gradients = true;
};

/// Adapter -> five-stage encoder -> top-down FPN -> two pixel-shuffle stages -> 1×1 head -> sigmoid.
/// Throws ShapeError unless H and W are positive multiples of 64.
ForwardResult forward(const ParamSet& params, const NetworkConfig& config, const Tensor& input, Tape& tape,
                      const ForwardOptions& options = {});

/// Collects parameter gradients after tape.backward().
Gradients collect_gradients(const Tape& tape, const ForwardResult& fr);

/// 37-channel input: frames oldest-first (9 bands each), target pixels zeroed
/// inside mask, then the mask itself.
Tensor build_input(const TimeCube& cube, const BoolGrid& mask);

/// {4, H, W} observed output bands of the target frame.
Tensor target_tensor(const TimeCube& cube);
Tensor mask_tensor(const BoolGrid& mask, int channels);

/// Runs the network on the masked cube. Throws ShapeError.
OutputStack predict_masked(const ParamSet& params, const NetworkConfig& config, const TimeCube& cube,
                           const BoolGrid& mask);

class InpaintPredictor final : public detectors::Predictor {
 public:
  InpaintPredictor(ParamSet params, NetworkConfig config) : params_(std::move(params)), config_(config) {}
  std::string id() const override { return "inpaint"; }
  OutputStack predict(const TimeCube& cube, const BoolGrid& inpaint_mask) const override {
    return predict_masked(params_, config_, cube, inpaint_mask);
  }

 private:
  ParamSet params_;
  NetworkConfig config_;
};

}  // namespace tiad::inpainter
