#include "trainer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include "common/error.hpp"
#include "common/random.hpp"

namespace polyscore::train {

namespace {

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

class SgdTrainer {
 public:
  SgdTrainer(const PolyNetwork& net, const TrainConfig& cfg, Rng& rng) : net_(net), cfg_(cfg), rng_(rng) {
    velocity_.resize(net.layers().size());
    for (std::size_t l = 0; l < net.layers().size(); ++l)
      for (const auto& p : net.layers()[l].params) velocity_[l].push_back(Tensor::zeros(p.shape));
  }

  const PolyNetwork& net() const { return net_; }

  EpochStats epoch(const LabeledFrames& data, double lr, const quant::QuantizationPlan* plan, Phase phase,
                   int epoch_number) {
    const auto n = data.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng_);

    const auto& layers = net_.layers();
    QuantHooks hooks;
    if (plan) hooks = hooks_for(*plan, layers.size(), cfg_.quantize_gradients);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    ParamGrads sum(layers.size());
    for (std::size_t start = 0; start < n; start += cfg_.minibatch_size) {
      const auto stop = std::min(n, start + cfg_.minibatch_size);
      const PolyNetwork model = plan ? quant::quantize_parameters(net_, *plan) : net_;
      for (std::size_t l = 0; l < layers.size(); ++l) {
        sum[l].clear();
        for (const auto& p : layers[l].params) sum[l].push_back(Tensor::zeros(p.shape));
      }
      for (std::size_t k = start; k < stop; ++k) {
        const auto idx = order[k];
        const Tensor x = slice_row(data.frames, idx);
        const auto r = backward_detailed(model, x, data.labels[idx], plan ? &hooks : nullptr);
        if (!std::isfinite(r.loss))
          raise(ErrorCode::Divergence, std::string("training diverged (non-finite loss) in phase ") +
                                           to_string(phase) + ", epoch " + std::to_string(epoch_number));
        loss_sum += r.loss;
        correct += r.predicted == data.labels[idx] ? 1 : 0;
        for (std::size_t l = 0; l < layers.size(); ++l)
          for (std::size_t p = 0; p < r.grads[l].size(); ++p) {
            auto& dst = sum[l][p].data;
            const auto& src = r.grads[l][p].data;
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
          }
      }
      step(sum, lr, static_cast<double>(stop - start), plan);
    }
    return {loss_sum / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
  }

 private:
  void step(ParamGrads& grads, double lr, double batch, const quant::QuantizationPlan* plan) {
    double scale = 1.0 / batch;
    if (plan && cfg_.quantize_gradients) {
      for (std::size_t l = 0; l < grads.size(); ++l)
        if (const auto* cb = plan->get(l, quant::TensorRole::WeightGradients))
          for (auto& g : grads[l]) {
            for (auto& v : g.data) v = cb->quantize(v * scale);
          }
      scale = 1.0;
    }
    if (cfg_.max_grad_norm > 0.0) {
      double sq = 0.0;
      for (const auto& layer : grads)
        for (const auto& g : layer)
          for (double v : g.data) sq += v * v;
      const double norm = std::sqrt(sq) * scale;
      if (norm > cfg_.max_grad_norm) scale *= cfg_.max_grad_norm / norm;
    }
    std::vector<std::vector<Tensor>> params(net_.layers().size());
    for (std::size_t l = 0; l < params.size(); ++l) {
      params[l] = net_.layers()[l].params;
      for (std::size_t p = 0; p < params[l].size(); ++p) {
        auto& w = params[l][p].data;
        auto& v = velocity_[l][p].data;
        const auto& g = grads[l][p].data;
        for (std::size_t i = 0; i < w.size(); ++i) {
          v[i] = cfg_.momentum * v[i] + g[i] * scale;
          w[i] -= lr * v[i];
        }
        params[l][p].codebook.reset();
      }
    }
    net_ = with_parameters(net_, params);
  }

  PolyNetwork net_;
  const TrainConfig& cfg_;
  Rng& rng_;
  ParamGrads velocity_;
};

double retrain_lr(const TrainConfig& cfg) {
  return cfg.retrain_learning_rate > 0.0 ? cfg.retrain_learning_rate : cfg.learning_rate / 4.0;
}

void check_data(const PolyNetwork& net, const LabeledFrames& data) {
  data.validate();
  require(data.size() > 0, ErrorCode::InvalidArgument, "training set is empty");
  require(data.frame_size() == net.input_size(), ErrorCode::ShapeMismatch, "frame size does not match network input");
  for (auto y : data.labels) require(y < net.output_dim(), ErrorCode::InvalidArgument, "label out of range");
}

}  // namespace

const char* to_string(Phase phase) {
  switch (phase) {
    case Phase::FloatFinetune:
      return "float-finetune";
    case Phase::CodebookFit:
      return "codebook-fit";
    case Phase::QuantizedRetrain:
      return "quantized-retrain";
  }
  return "unknown";
}

void TrainConfig::validate() const {
  require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorCode::Config, "learning rate must be positive");
  require(momentum >= 0.0 && momentum < 1.0, ErrorCode::Config, "momentum must lie in [0, 1)");
  require(minibatch_size > 0, ErrorCode::Config, "minibatch size must be positive");
  require(float_epochs >= 0 && retrain_epochs >= 0, ErrorCode::Config, "epoch counts must be non-negative");
  require(quant::supported_bits(bits), ErrorCode::Config, "bits must be 2, 4, 8 or 16");
  require(calibration_frames > 0, ErrorCode::Config, "calibration frame count must be positive");
}

void TrainReport::write_csv(std::ostream& os) const {
  os << "epoch,phase,loss,acc\n";
  os.precision(8);
  for (const auto& e : epochs) os << e.epoch << ',' << to_string(e.phase) << ',' << e.loss << ',' << e.heldout_accuracy << '\n';
}

void TrainReport::write_csv(const std::string& path) const {
  std::ofstream f(path);
  require(f.good(), ErrorCode::Io, "cannot open report file " + path);
  write_csv(f);
}

const EpochRecord* TrainReport::last(Phase phase) const {
  for (auto it = epochs.rbegin(); it != epochs.rend(); ++it)
    if (it->phase == phase) return &*it;
  return nullptr;
}

Evaluation evaluate(const PolyNetwork& net, const LabeledFrames& data, const quant::QuantizationPlan* plan) {
  check_data(net, data);
  QuantHooks hooks;
  if (plan) hooks = hooks_for(*plan, net.layers().size(), false);
  const bool ends_softmax = !net.layers().empty() && net.layers().back().kind == LayerKind::Softmax;
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto trace = forward_trace_quantized(net, slice_row(data.frames, i), plan ? &hooks : nullptr);
    const auto& out = trace.back();
    loss += cross_entropy(out.values(), data.labels[i], ends_softmax);
    correct += argmax(out.values()) == data.labels[i] ? 1 : 0;
  }
  const auto n = static_cast<double>(data.size());
  return {loss / n, static_cast<double>(correct) / n};
}

PolyNetwork make_mlp(std::size_t inputs, const std::vector<std::size_t>& hidden, std::size_t outputs,
                     LayerKind activation, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Layer> layers;
  std::size_t fan_in = inputs;
  auto dense = [&](std::size_t out) {
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-a, a);
    Tensor w({out, fan_in});
    for (auto& v : w.data) v = u(rng);
    layers.push_back(Layer::dense(std::move(w), Tensor::zeros({out})));
    fan_in = out;
  };
  for (auto h : hidden) {
    dense(h);
    layers.push_back(Layer::activation(activation));
  }
  dense(outputs);
  return PolyNetwork({inputs}, std::move(layers));
}

PolyNetwork train_float(const PolyNetwork& net, const LabeledFrames& train, const LabeledFrames* heldout,
                        const TrainConfig& cfg, int epochs, TrainReport* report, int first_epoch) {
  cfg.validate();
  check_data(net, train);
  Rng rng(cfg.seed);
  SgdTrainer trainer(net, cfg, rng);
  for (int e = 0; e < epochs; ++e) {
    const int number = first_epoch + e;
    const auto stats = trainer.epoch(train, cfg.learning_rate, nullptr, Phase::FloatFinetune, number);
    if (report) {
      EpochRecord rec{number, Phase::FloatFinetune, stats.loss, stats.accuracy, stats.accuracy};
      if (heldout) rec.heldout_accuracy = evaluate(trainer.net(), *heldout).accuracy;
      report->epochs.push_back(rec);
    }
  }
  return trainer.net();
}

QuantizedModel fit_and_retrain(const PolyNetwork& finetuned, const LabeledFrames& train,
                               const LabeledFrames* heldout, const TrainConfig& cfg, TrainReport report) {
  cfg.validate();
  check_data(finetuned, train);
  require(finetuned.he_compatible(), ErrorCode::InvalidArgument,
          "quantized training expects a converted polynomial network");
  int epoch = report.epochs.empty() ? 0 : report.epochs.back().epoch;

  // Phase 2: codebooks from the current weights and a calibration pass.
  quant::PlanOptions opts;
  opts.calibration_frames = cfg.calibration_frames;
  opts.include_gradients = cfg.quantize_gradients;
  opts.minibatch_size = cfg.minibatch_size;
  auto plan = quant::plan_quantization(finetuned, cfg.bits, train.frames, train.labels, opts);
  {
    const auto qnet = quant::quantize_parameters(finetuned, plan);
    EpochRecord rec{++epoch, Phase::CodebookFit, 0.0, 0.0, 0.0};
    const auto tr = evaluate(qnet, train, &plan);
    rec.loss = tr.loss;
    rec.train_accuracy = tr.accuracy;
    rec.heldout_accuracy = heldout ? evaluate(qnet, *heldout, &plan).accuracy : tr.accuracy;
    report.epochs.push_back(rec);
  }

  // Phase 3: straight-through retraining on a float shadow copy. At 16 bits the
  // grid is effectively lossless and retraining is skipped.
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  SgdTrainer trainer(finetuned, cfg, rng);
  const int retrain_epochs = cfg.bits == 16 ? 0 : cfg.retrain_epochs;
  for (int e = 0; e < retrain_epochs; ++e) {
    ++epoch;
    if (cfg.quantize_gradients && cfg.refresh_gradient_codebooks && e > 0)
      quant::refresh_gradient_codebooks(plan, trainer.net(), train.frames, train.labels, cfg.calibration_frames,
                                        cfg.minibatch_size);
    const auto stats = trainer.epoch(train, retrain_lr(cfg), &plan, Phase::QuantizedRetrain, epoch);
    EpochRecord rec{epoch, Phase::QuantizedRetrain, stats.loss, stats.accuracy, stats.accuracy};
    if (heldout) rec.heldout_accuracy = evaluate(quant::quantize_parameters(trainer.net(), plan), *heldout, &plan).accuracy;
    report.epochs.push_back(rec);
  }
  if (retrain_epochs == 0) {
    const auto* fit = report.last(Phase::CodebookFit);
    EpochRecord rec = *fit;
    rec.epoch = ++epoch;
    rec.phase = Phase::QuantizedRetrain;
    report.epochs.push_back(rec);
  }

  QuantizedModel out{quant::quantize_parameters(trainer.net(), plan), std::move(plan), std::move(report)};
  return out;
}

QuantizedModel train_quantized(const PolyNetwork& dpn, const LabeledFrames& train, const LabeledFrames* heldout,
                               const TrainConfig& cfg) {
  cfg.validate();
  require(dpn.he_compatible(), ErrorCode::InvalidArgument, "quantized training expects a converted polynomial network");
  TrainReport report;
  const PolyNetwork finetuned = train_float(dpn, train, heldout, cfg, cfg.float_epochs, &report, 1);
  return fit_and_retrain(finetuned, train, heldout, cfg, std::move(report));
}

}  // namespace polyscore::train
