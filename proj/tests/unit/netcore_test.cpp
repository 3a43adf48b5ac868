#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "common/error.hpp"
#include "common/random.hpp"
#include "netcore/fixed_point.hpp"
#include "netcore/network.hpp"

namespace polyscore {
namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = u(rng);
  return t;
}

Layer random_dense(std::size_t in, std::size_t out, Rng& rng) {
  return Layer::dense(random_tensor({out, in}, rng), random_tensor({out}, rng));
}

TEST(Netcore, DenseForward) {
  const auto l = Layer::dense(Tensor({2, 2}, {1, 2, 3, 4}), Tensor::vector({0.5, -1}));
  const auto y = layer_forward(l, Tensor::vector({1, 1}));
  EXPECT_EQ(y.data, (std::vector<double>{3.5, 6.0}));
}

TEST(Netcore, SquareActivation) {
  const auto y = layer_forward(Layer::activation(LayerKind::SquareActivation), Tensor::vector({-3, 0.5, 2}));
  EXPECT_EQ(y.data, (std::vector<double>{9, 0.25, 4}));
}

TEST(Netcore, SigmoidPolyValues) {
  EXPECT_EQ(sigmoid_poly(0.0), 0.5);
  EXPECT_DOUBLE_EQ(sigmoid_poly(2.0), 0.5 + 0.5 - 8.0 / 48.0);
  EXPECT_DOUBLE_EQ(sigmoid_poly(-1.0), 0.5 - 0.25 + 1.0 / 48.0);
  EXPECT_EQ(sigmoid_poly_derivative(0.0), 0.25);
  for (int i = -300; i <= 300; ++i) {
    const double z = i * 0.01;
    EXPECT_EQ(sigmoid_poly(z) + sigmoid_poly(-z), 1.0) << z;
  }
}

TEST(Netcore, ConvDifferenceKernel) {
  // A [1, -1] kernel over 1, 2, 4, 7 gives the negated first differences.
  const auto l = Layer::conv2d(Tensor({1, 1, 1, 2}, {1, -1}), Tensor::vector({0}));
  const auto y = layer_forward(l, Tensor({1, 1, 4}, {1, 2, 4, 7}));
  EXPECT_EQ(y.shape, (Shape{1, 1, 3}));
  EXPECT_EQ(y.data, (std::vector<double>{-1, -2, -3}));
}

TEST(Netcore, ConvSamePaddingKeepsSize) {
  Rng rng(1);
  const auto l = Layer::conv2d(random_tensor({2, 1, 3, 3}, rng), random_tensor({2}, rng), {1, Padding::Same});
  EXPECT_EQ(l.output_shape({1, 5, 5}), (Shape{2, 5, 5}));
  const auto strided = Layer::conv2d(random_tensor({1, 1, 2, 2}, rng), Tensor::vector({0}), {2, Padding::Valid});
  EXPECT_EQ(strided.output_shape({1, 6, 6}), (Shape{1, 3, 3}));
  EXPECT_THROW(Layer::conv2d(random_tensor({1, 1, 7, 7}, rng), Tensor::vector({0})).output_shape({1, 5, 5}), Error);
}

TEST(Netcore, MaxPoolBecomesWindowSum) {
  const Tensor x({1, 2, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
  EXPECT_EQ(layer_forward(Layer::pooling(LayerKind::MaxPool, 2, 2), x).data, (std::vector<double>{6, 8}));
  const PolyNetwork net({1, 2, 4}, {Layer::pooling(LayerKind::MaxPool, 2, 2)});
  const auto dpn = convert_to_dpn(net);
  EXPECT_EQ(dpn.layers()[0].kind, LayerKind::ScaledMeanPool);
  EXPECT_EQ(forward(dpn, x).data, (std::vector<double>{14, 22}));
}

TEST(Netcore, BatchNormFoldMatchesUnfolded) {
  Rng rng(2);
  for (bool before : {false, true}) {
    std::vector<Layer> layers;
    const auto bn = Layer::batch_norm(random_tensor({4}, rng), random_tensor({4}, rng), random_tensor({4}, rng),
                                      random_tensor({4}, rng, 0.5, 2.0));
    if (before) layers.push_back(bn);
    layers.push_back(random_dense(4, 4, rng));
    if (!before) layers.push_back(bn);
    layers.push_back(Layer::activation(LayerKind::SquareActivation));
    layers.push_back(random_dense(4, 3, rng));
    const PolyNetwork net({4}, layers);
    const auto folded = fold_batchnorm(net);
    EXPECT_EQ(folded.layers().size(), layers.size() - 1);
    for (int i = 0; i < 20; ++i) {
      const auto x = random_tensor({4}, rng);
      const auto a = forward(net, x), b = forward(folded, x);
      for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-12 * (1 + std::fabs(a[k])));
    }
  }
}

TEST(Netcore, BatchNormWithoutNeighbourIsRejected) {
  const PolyNetwork net({2}, {Layer::activation(LayerKind::SquareActivation),
                              Layer::batch_norm(Tensor::vector({1, 1}), Tensor::vector({0, 0}),
                                                Tensor::vector({0, 0}), Tensor::vector({1, 1})),
                              Layer::activation(LayerKind::SquareActivation)});
  try {
    fold_batchnorm(net);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Unsupported);
  }
}

TEST(Netcore, ConversionAndCompatibility) {
  Rng rng(3);
  const PolyNetwork net({4}, {random_dense(4, 4, rng), Layer::activation(LayerKind::ReLU), random_dense(4, 4, rng),
                              Layer::activation(LayerKind::Sigmoid), random_dense(4, 2, rng),
                              Layer::activation(LayerKind::Softmax)});
  EXPECT_FALSE(net.he_compatible());
  const auto dpn = convert_to_dpn(net);
  EXPECT_TRUE(dpn.he_compatible());
  ASSERT_EQ(dpn.layers().size(), 5u);
  EXPECT_EQ(dpn.layers()[1].kind, LayerKind::SquareActivation);
  EXPECT_EQ(dpn.layers()[3].kind, LayerKind::SigmoidPoly);
  EXPECT_EQ(dpn.layers()[0].params[0].data, net.layers()[0].params[0].data);
  EXPECT_EQ(multiplicative_depth(dpn).depth, 3);
  EXPECT_THROW(multiplicative_depth(net), Error);
}

TEST(Netcore, DepthCounts) {
  Rng rng(4);
  const auto sq = Layer::activation(LayerKind::SquareActivation);
  const auto sp = Layer::activation(LayerKind::SigmoidPoly);
  EXPECT_EQ(multiplicative_depth(PolyNetwork({3}, {random_dense(3, 3, rng)})).depth, 0);
  EXPECT_EQ(multiplicative_depth(PolyNetwork({3}, {random_dense(3, 3, rng), sq, random_dense(3, 2, rng)})).depth, 1);
  EXPECT_EQ(multiplicative_depth(PolyNetwork({3}, {random_dense(3, 3, rng), sp, random_dense(3, 2, rng)})).depth, 2);
  EXPECT_EQ(multiplicative_depth(PolyNetwork({3}, {random_dense(3, 3, rng), sq, random_dense(3, 3, rng), sq,
                                                   random_dense(3, 2, rng)}))
                .depth,
            2);
}

TEST(Netcore, ShapeErrors) {
  Rng rng(5);
  EXPECT_THROW(PolyNetwork({3}, {random_dense(4, 2, rng)}), Error);
  EXPECT_THROW(forward(PolyNetwork({3}, {random_dense(3, 2, rng)}), Tensor::vector({1, 2})), Error);
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), Error);
}

TEST(Netcore, FixedPointMatchesSnappedFloat) {
  Rng rng(6);
  auto l1 = random_dense(5, 4, rng), l2 = random_dense(4, 3, rng);
  // Biases are rounded at each stage's output scale; keep them on a grid both scales hold.
  for (auto* l : {&l1, &l2})
    for (auto& b : l->params[1].data) b = std::round(b * 256) / 256;
  const PolyNetwork net({5}, {l1, Layer::activation(LayerKind::SquareActivation), l2});
  const auto fp = compile_fixed_point(net, 8, 8);
  const auto snapped = snap_to_fixed_point(net, 8);
  const std::uint64_t t = std::uint64_t{1} << 50;
  for (int i = 0; i < 20; ++i) {
    auto x = random_tensor({5}, rng, -4, 4);
    for (auto& v : x.data) v = std::round(v * 256) / 256;  // on the input grid
    const auto enc = encode_input(fp, x.values());
    const auto out = decode_outputs(fp, fixed_point_forward(fp, enc, t), t);
    const auto ref = forward(snapped, x);
    for (std::size_t k = 0; k < out.size(); ++k) EXPECT_NEAR(out[k], ref[k], 1e-9 * (1 + std::fabs(ref[k])));
  }
}

}  // namespace
}  // namespace polyscore
