#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>

#include "common/error.hpp"
#include "common/random.hpp"
#include "io/features.hpp"
#include "io/model_io.hpp"
#include "io/posteriors.hpp"
#include "quantizer/plan.hpp"
#include "trainer/trainer.hpp"

namespace polyscore::io {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir() {
  const auto dir = fs::temp_directory_path() / ("polyscore_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
  fs::create_directories(dir);
  return dir;
}

void expect_code(ErrorCode code, const std::function<void()>& f) {
  try {
    f();
    ADD_FAILURE() << "no error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

TEST(Io, FeatureRoundTrip) {
  FeatureFile f{3, {{1.5, -2.0, 0.25}, {0.0, 3.0, -1.0}}};
  const auto back = decode_features(encode_features(f));
  EXPECT_EQ(back.dims, 3u);
  EXPECT_EQ(back.frames, f.frames);
  const auto path = (temp_dir() / "f.feat").string();
  save_features(path, f);
  EXPECT_EQ(load_features(path).frames, f.frames);
}

TEST(Io, FeatureErrors) {
  expect_code(ErrorCode::Config, [] { decode_features({}); });
  auto bytes = encode_features({2, {{1, 2}}});
  bytes.pop_back();
  expect_code(ErrorCode::Config, [&] { decode_features(bytes); });
  expect_code(ErrorCode::NonFinite, [] { encode_features({1, {{NAN}}}); });
  expect_code(ErrorCode::Io, [] { load_features("/nonexistent/dir/f.feat"); });
}

TEST(Io, ModelManifestRoundTrip) {
  const auto net = convert_to_dpn(train::make_mlp(6, {5}, 3, LayerKind::ReLU, 4));
  ModelBundle m{net, std::nullopt, 8, 8};
  const auto path = (temp_dir() / "float.json").string();
  save_model(m, path);
  const auto back = load_model(path);
  ASSERT_EQ(back.net.layers().size(), net.layers().size());
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    EXPECT_EQ(back.net.layers()[l].kind, net.layers()[l].kind);
    for (std::size_t p = 0; p < net.layers()[l].params.size(); ++p)
      for (std::size_t i = 0; i < net.layers()[l].params[p].size(); ++i)
        EXPECT_EQ(back.net.layers()[l].params[p][i], static_cast<double>(static_cast<float>(net.layers()[l].params[p][i])));
  }
  EXPECT_FALSE(back.plan.has_value());
}

TEST(Io, QuantizedManifestKeepsCentroidsExactly) {
  Rng rng(5);
  const auto net = convert_to_dpn(train::make_mlp(6, {5}, 3, LayerKind::ReLU, 4));
  std::normal_distribution<double> g;
  Tensor calib({100, 6});
  for (auto& v : calib.data) v = g(rng);
  quant::PlanOptions opts;
  opts.include_gradients = false;
  const auto plan = quant::plan_quantization(net, 4, calib, {}, opts);
  const auto qnet = quant::quantize_parameters(net, plan);
  std::vector<std::uint8_t> sidecar;
  const auto manifest = encode_manifest({qnet, plan, 8, 8}, "q.weights.bin", sidecar);
  const auto back = decode_manifest(manifest, sidecar);
  ASSERT_TRUE(back.plan.has_value());
  EXPECT_EQ(back.plan->bits, 4);
  for (std::size_t l = 0; l < qnet.layers().size(); ++l)
    for (std::size_t p = 0; p < qnet.layers()[l].params.size(); ++p)
      EXPECT_EQ(back.net.layers()[l].params[p].data, qnet.layers()[l].params[p].data);
  expect_code(ErrorCode::Config, [&] { decode_manifest("{", sidecar); });
  sidecar.resize(sidecar.size() / 2);
  expect_code(ErrorCode::Config, [&] { decode_manifest(manifest, sidecar); });
}

TEST(Io, PosteriorRoundTrip) {
  PosteriorFile p;
  p.dims = 2;
  p.probabilities = true;
  p.frames = {{0, {0.1, 0.9}}, {1, {0.0, 0.0}}, {2, {1.0 / 3.0, 2.0 / 3.0}}};
  p.flagged = {false, true, false};
  const auto back = parse_posteriors(format_posteriors(p));
  EXPECT_EQ(back.dims, 2u);
  EXPECT_TRUE(back.probabilities);
  EXPECT_EQ(back.flagged, p.flagged);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.frames[i].frame_index, i);
    EXPECT_EQ(back.frames[i].scores, p.frames[i].scores);
  }
  const auto scores = decoding_scores(back);
  EXPECT_DOUBLE_EQ(scores[0].scores[1], std::log(0.9));
  EXPECT_TRUE(std::isfinite(scores[1].scores[0]));
  expect_code(ErrorCode::Config, [] { parse_posteriors("polyscore-posteriors 1 dims=2 frames=1 probabilities=0\n0 0 1\n"); });
  expect_code(ErrorCode::Config, [] { parse_posteriors("garbage\n"); });
}

}  // namespace
}  // namespace polyscore::io
