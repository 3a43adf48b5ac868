#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "netcore/network.hpp"
#include "quantizer/plan.hpp"
#include "trainer/backprop.hpp"
#include "trainer/dataset.hpp"

namespace polyscore::train {

enum class Phase { FloatFinetune, CodebookFit, QuantizedRetrain };
const char* to_string(Phase phase);

struct TrainConfig {
  double learning_rate = 0.002;
  /// Learning rate of the quantized retraining phase; <= 0 means learning_rate / 4.
  double retrain_learning_rate = 0.0;
  double momentum = 0.9;
  std::size_t minibatch_size = 64;
  int float_epochs = 20;
  int retrain_epochs = 10;
  int bits = 8;
  std::uint64_t seed = 1;
  std::size_t calibration_frames = 10000;
  bool quantize_gradients = true;
  /// Refit gradient codebooks at the start of every retraining epoch.
  bool refresh_gradient_codebooks = true;
  /// Global L2 clip on each minibatch gradient; <= 0 disables clipping.
  double max_grad_norm = 0.0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  Phase phase = Phase::FloatFinetune;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double heldout_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;

  /// CSV with columns epoch,phase,loss,acc (acc is held-out accuracy).
  void write_csv(std::ostream& os) const;
  void write_csv(const std::string& path) const;
  const EpochRecord* last(Phase phase) const;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

Evaluation evaluate(const PolyNetwork& net, const LabeledFrames& data, const quant::QuantizationPlan* plan = nullptr);

/// Fully connected stack: Dense(in->h1), act, Dense(h1->h2), act, ..., Dense(->out).
/// Weights uniform in +-1/sqrt(fan_in), biases zero.
PolyNetwork make_mlp(std::size_t inputs, const std::vector<std::size_t>& hidden, std::size_t outputs,
                     LayerKind activation, std::uint64_t seed);

/// Plain float SGD with momentum; appends one FloatFinetune record per epoch.
PolyNetwork train_float(const PolyNetwork& net, const LabeledFrames& train, const LabeledFrames* heldout,
                        const TrainConfig& cfg, int epochs, TrainReport* report = nullptr, int first_epoch = 1);

struct QuantizedModel {
  PolyNetwork net;  // parameters on their codebook centroids
  quant::QuantizationPlan plan;
  TrainReport report;
};

/// Codebook fit followed by quantized retraining (phases 2 and 3), starting
/// from an already fine-tuned DPN. `report` should hold the phase-1 records.
QuantizedModel fit_and_retrain(const PolyNetwork& finetuned, const LabeledFrames& train,
                               const LabeledFrames* heldout, const TrainConfig& cfg, TrainReport report = {});

/// All three phases: float fine-tuning, codebook fit, quantized retraining.
QuantizedModel train_quantized(const PolyNetwork& dpn, const LabeledFrames& train, const LabeledFrames* heldout,
                               const TrainConfig& cfg);

}  // namespace polyscore::train
