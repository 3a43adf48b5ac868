#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "common/error.hpp"
#include "common/random.hpp"
#include "decoder/decoder.hpp"

namespace polyscore {
namespace {

std::vector<double> random_log_distribution(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> p(n);
  double sum = 0;
  for (auto& v : p) sum += v = u(rng);
  for (auto& v : p) v = std::log(v / sum);
  return p;
}

DecodeGraph random_graph(std::size_t n, Rng& rng) {
  DecodeGraph g = DecodeGraph::uniform(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = random_log_distribution(n, rng);
    std::copy(row.begin(), row.end(), g.log_transitions.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  g.log_initial = random_log_distribution(n, rng);
  return g;
}

std::vector<PosteriorFrame> random_frames(std::size_t t, std::size_t n, Rng& rng) {
  std::normal_distribution<double> g(0.0, 2.0);
  std::vector<PosteriorFrame> frames(t);
  for (std::size_t i = 0; i < t; ++i) {
    frames[i].frame_index = i;
    frames[i].scores.resize(n);
    for (auto& v : frames[i].scores) v = g(rng);
  }
  return frames;
}

// Best score over all N^T paths; ties keep the lexicographically smallest path.
ViterbiResult exhaustive(const std::vector<PosteriorFrame>& frames, const DecodeGraph& g) {
  const std::size_t n = g.states, t = frames.size();
  std::vector<std::size_t> path(t, 0);
  ViterbiResult best{path, -INFINITY};
  for (;;) {
    const double s = path_score(frames, g, path);
    if (s > best.log_score) best = {path, s};
    std::size_t k = t;
    while (k > 0 && path[k - 1] == n - 1) path[--k] = 0;
    if (k == 0) break;
    ++path[k - 1];
  }
  return best;
}

TEST(Decoder, ViterbiMatchesExhaustiveSearch) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 4, t = 1 + rng() % 6;
    const auto g = random_graph(n, rng);
    const auto frames = random_frames(t, n, rng);
    const auto v = viterbi(frames, g);
    const auto e = exhaustive(frames, g);
    EXPECT_NEAR(v.log_score, e.log_score, 1e-12);
    EXPECT_NEAR(path_score(frames, g, v.path), v.log_score, 1e-12);
  }
}

TEST(Decoder, CraftedThreeStateInstance) {
  // Emissions favour 0,1,2 framewise, but transitions forbid 0 -> 1.
  DecodeGraph g = DecodeGraph::uniform(3);
  const double l = std::log(0.5);
  g.log_transitions = {l, -INFINITY, l, l, l, -INFINITY, -INFINITY, l, l};
  std::vector<PosteriorFrame> frames = {{0, {2.0, 0.0, 0.0}}, {1, {0.0, 1.0, 0.9}}, {2, {0.0, 0.0, 3.0}}};
  const auto v = viterbi(frames, g);
  EXPECT_EQ(v.path, (std::vector<std::size_t>{0, 2, 2}));
  EXPECT_NEAR(v.log_score, exhaustive(frames, g).log_score, 1e-12);
}

TEST(Decoder, UniformGraphReducesToFramewiseArgmax) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng() % 8;
    const auto frames = random_frames(1 + rng() % 30, n, rng);
    EXPECT_EQ(viterbi(frames, DecodeGraph::uniform(n)).path, framewise_argmax(frames));
  }
}

TEST(Decoder, SingleFrameIsArgmaxOfPriorPlusScores) {
  Rng rng(3);
  const auto g = random_graph(5, rng);
  const auto frames = random_frames(1, 5, rng);
  std::size_t best = 0;
  for (std::size_t s = 1; s < 5; ++s)
    if (g.log_initial[s] + frames[0].scores[s] > g.log_initial[best] + frames[0].scores[best]) best = s;
  EXPECT_EQ(viterbi(frames, g).path, std::vector<std::size_t>{best});
}

TEST(Decoder, ArgmaxTieBreaksLow) {
  EXPECT_EQ(framewise_argmax({{0, {0.1, 0.9}}}), std::vector<std::size_t>{1});
  EXPECT_EQ(framewise_argmax({{0, {0.5, 0.5}}}), std::vector<std::size_t>{0});
  // Viterbi tie-break also prefers the lower state.
  EXPECT_EQ(viterbi({{0, {1.0, 1.0}}, {1, {1.0, 1.0}}}, DecodeGraph::uniform(2)).path,
            (std::vector<std::size_t>{0, 0}));
}

TEST(Decoder, ShiftInvariance) {
  Rng rng(4);
  const auto g = random_graph(4, rng);
  auto frames = random_frames(12, 4, rng);
  const auto before = viterbi(frames, g);
  std::uniform_real_distribution<double> shift(-50, 50);
  for (auto& f : frames) {
    const double c = shift(rng);
    for (auto& v : f.scores) v += c;
  }
  EXPECT_EQ(viterbi(frames, g).path, before.path);
}

TEST(Decoder, DominatesSampledPaths) {
  Rng rng(5);
  const auto g = random_graph(6, rng);
  const auto frames = random_frames(40, 6, rng);
  const auto v = viterbi(frames, g);
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::size_t> path(frames.size());
    for (auto& s : path) s = rng() % 6;
    EXPECT_GE(v.log_score + 1e-9, path_score(frames, g, path));
  }
}

TEST(Decoder, EmissionIndexMapsStatesToScores) {
  DecodeGraph g = DecodeGraph::uniform(4);
  g.emission_index = {0, 0, 1, 1};
  g.labels = {"a", "a", "b", "b"};
  std::vector<PosteriorFrame> frames = {{0, {0.0, 2.0}}, {1, {3.0, 0.0}}};
  const auto v = viterbi(frames, g);
  EXPECT_EQ(g.emission_index[v.path[0]], 1u);
  EXPECT_EQ(g.emission_index[v.path[1]], 0u);
  EXPECT_EQ(transcript(v.path, g), "b a");
}

TEST(Decoder, Errors) {
  const auto g = DecodeGraph::uniform(3);
  EXPECT_THROW(viterbi({}, g), Error);
  try {
    viterbi({{0, {1.0, 2.0}}}, g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
  try {
    viterbi({{0, {1.0, NAN, 0.0}}}, g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFinite);
  }
  DecodeGraph bad = g;
  bad.log_transitions[0] = 0.0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Decoder, GraphFileRoundTrip) {
  Rng rng(6);
  auto g = random_graph(3, rng);
  g.labels = {"sil", "ah", "sil"};
  g.log_transitions[2] = -INFINITY;
  // Renormalize row 0 after removing an arc.
  const double keep = std::log(std::exp(g.log_transitions[0]) + std::exp(g.log_transitions[1]));
  g.log_transitions[0] -= keep;
  g.log_transitions[1] -= keep;
  std::istringstream in("# comment line\n" + format_graph(g));
  const auto back = parse_graph(in);
  EXPECT_EQ(back.states, 3u);
  EXPECT_EQ(back.labels, g.labels);
  EXPECT_EQ(back.emission_index, g.emission_index);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(back.log_transitions[i], g.log_transitions[i]);
  EXPECT_EQ(transcript({0, 0, 1, 1, 2}, back), "sil ah sil");
}

TEST(Decoder, GraphFileErrors) {
  for (const char* text : {"", "initial 0\n", "states 2\ninitial 0 0\ntransitions\n0 0\n0 0\n",
                           "states 1\ninitial 0\ntransitions\nabc\n", "states 1\nbogus 1\n"}) {
    std::istringstream in(text);
    try {
      parse_graph(in);
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::Config);
    }
  }
  std::istringstream ok("states 1\ninitial 0\ntransitions\n0\n");
  EXPECT_EQ(parse_graph(ok).states, 1u);
}

}  // namespace
}  // namespace polyscore
