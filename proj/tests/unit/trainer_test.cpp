#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "common/error.hpp"
#include "common/random.hpp"
#include "trainer/backprop.hpp"
#include "trainer/trainer.hpp"

namespace polyscore::train {
namespace {

ToyTaskConfig small_task() {
  ToyTaskConfig cfg;
  cfg.classes = 4;
  cfg.dims = 8;
  cfg.train_frames = 2000;
  cfg.test_frames = 400;
  return cfg;
}

TEST(Trainer, ToyTaskIsDeterministicAndBalanced) {
  const auto a = make_toy_task(7, small_task());
  const auto b = make_toy_task(7, small_task());
  const auto c = make_toy_task(8, small_task());
  EXPECT_EQ(a.train.frames.data, b.train.frames.data);
  EXPECT_EQ(a.test.labels, b.test.labels);
  EXPECT_NE(a.train.frames.data, c.train.frames.data);
  std::vector<std::size_t> counts(4, 0);
  for (auto l : a.train.labels) ++counts[l];
  for (auto n : counts) EXPECT_EQ(n, 500u);
  // Standardized with training statistics.
  double mean = 0;
  for (std::size_t i = 0; i < a.train.size(); ++i) mean += a.train.frames[i * 8];
  EXPECT_NEAR(mean / static_cast<double>(a.train.size()), 0.0, 1e-9);
}

TEST(Trainer, CrossEntropy) {
  const std::vector<double> s{0.0, 0.0};
  EXPECT_DOUBLE_EQ(cross_entropy(s, 0), std::log(2.0));
  const std::vector<double> p{0.25, 0.75};
  EXPECT_DOUBLE_EQ(cross_entropy(p, 1, true), -std::log(0.75));
}

TEST(Trainer, SquareAndSigmoidPolyGradients) {
  // One-element layers: d/dz z^2 = 2z and d/dz p(z) = 1/4 - z^2/16.
  std::vector<Tensor> unused;
  const auto x = Tensor::vector({3.0});
  const auto dy = Tensor::vector({1.0});
  const auto sq = Layer::activation(LayerKind::SquareActivation);
  EXPECT_DOUBLE_EQ(layer_backward(sq, x, layer_forward(sq, x), dy, &unused)[0], 6.0);
  const auto sp = Layer::activation(LayerKind::SigmoidPoly);
  EXPECT_DOUBLE_EQ(layer_backward(sp, x, layer_forward(sp, x), dy, &unused)[0], 0.25 - 9.0 / 16.0);
  const auto z = Tensor::vector({0.0});
  EXPECT_DOUBLE_EQ(layer_backward(sp, z, layer_forward(sp, z), dy, &unused)[0], 0.25);
}

TEST(Trainer, BackpropMatchesFiniteDifferences) {
  Rng rng(3);
  const auto net = make_mlp(5, {4, 3}, 3, LayerKind::SquareActivation, 11);
  std::normal_distribution<double> g;
  Tensor x({5});
  for (auto& v : x.data) v = g(rng);
  const auto grads = backward(net, x, 1);
  const double eps = 1e-5;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    for (std::size_t p = 0; p < net.layers()[l].params.size(); ++p) {
      for (std::size_t i = 0; i < net.layers()[l].params[p].size(); ++i) {
        auto layers = net.layers();
        layers[l].params[p][i] += eps;
        const double up = cross_entropy(forward(PolyNetwork(net.input_shape(), layers), x).values(), 1);
        layers[l].params[p][i] -= 2 * eps;
        const double down = cross_entropy(forward(PolyNetwork(net.input_shape(), layers), x).values(), 1);
        EXPECT_NEAR(grads[l][p][i], (up - down) / (2 * eps), 1e-6);
      }
    }
  }
}

TEST(Trainer, FloatTrainingLearnsTheTask) {
  const auto task = make_toy_task(1, small_task());
  const auto net = make_mlp(8, {16}, 4, LayerKind::ReLU, 2);
  TrainConfig cfg;
  cfg.learning_rate = 0.02;
  TrainReport report;
  const auto before = evaluate(net, task.test).accuracy;
  const auto trained = train_float(net, task.train, &task.test, cfg, 5, &report);
  const auto after = evaluate(trained, task.test).accuracy;
  EXPECT_GT(after, before + 0.2);
  ASSERT_EQ(report.epochs.size(), 5u);
  EXPECT_DOUBLE_EQ(report.last(Phase::FloatFinetune)->heldout_accuracy, after);
  EXPECT_LT(report.epochs.back().loss, report.epochs.front().loss);
}

TEST(Trainer, QuantizedRetrainingKeepsParametersOnCentroids) {
  const auto task = make_toy_task(1, small_task());
  const auto dpn = convert_to_dpn(make_mlp(8, {8}, 4, LayerKind::ReLU, 3));
  TrainConfig cfg;
  cfg.learning_rate = 0.003;
  cfg.max_grad_norm = 1.0;
  cfg.float_epochs = 2;
  cfg.retrain_epochs = 2;
  cfg.bits = 4;
  cfg.calibration_frames = 500;
  const auto q = train_quantized(dpn, task.train, &task.test, cfg);
  for (std::size_t l = 0; l < q.net.layers().size(); ++l) {
    if (q.net.layers()[l].kind != LayerKind::Dense) continue;
    const auto* cb = q.plan.get(l, quant::TensorRole::Weights);
    ASSERT_NE(cb, nullptr);
    for (double w : q.net.layers()[l].params[0].data) EXPECT_EQ(cb->quantize(w), w);
  }
  // Two float epochs, the codebook-fit row, two retraining epochs.
  EXPECT_EQ(q.report.epochs.size(), 5u);
  std::ostringstream csv;
  q.report.write_csv(csv);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "epoch,phase,loss,acc");
}

TEST(Trainer, ConfigValidation) {
  TrainConfig cfg;
  cfg.bits = 3;
  EXPECT_THROW(cfg.validate(), Error);
  cfg.bits = 8;
  cfg.learning_rate = -1;
  EXPECT_THROW(cfg.validate(), Error);
  cfg.learning_rate = 0.01;
  cfg.minibatch_size = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

}  // namespace
}  // namespace polyscore::train
