#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <thread>

#include "acceptance.hpp"
#include "common/bytes.hpp"
#include "common/random.hpp"
#include "decoder/decoder.hpp"
#include "hecrypt/params.hpp"
#include "protocol/client.hpp"
#include "protocol/session.hpp"
#include "protocol/transport.hpp"

namespace polyscore::acceptance {
namespace {

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

PolyNetwork scoring_model(std::uint64_t seed) {
  Rng rng(seed);
  auto dense = [&](std::size_t o, std::size_t i) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Tensor w({o, i}), b({o});
    for (auto& v : w.data) v = u(rng) / std::sqrt(static_cast<double>(i));
    for (auto& v : b.data) v = 0.25 * u(rng);
    return Layer::dense(std::move(w), std::move(b));
  };
  return PolyNetwork({12}, {dense(10, 12), Layer::activation(LayerKind::SquareActivation), dense(4, 10)});
}

std::vector<std::vector<double>> frames(std::size_t count, std::size_t dims, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> out(count, std::vector<double>(dims));
  for (auto& f : out)
    for (auto& v : f) v = std::clamp(g(rng), -3.0, 3.0);
  return out;
}

bool contains(const std::vector<std::uint8_t>& hay, std::span<const std::uint8_t> needle) {
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

// The secret as raw ternary coefficients and as each little-endian NTT limb.
std::vector<std::vector<std::uint8_t>> secret_images(const he::SecretKey& sk) {
  std::vector<std::vector<std::uint8_t>> out;
  const auto* raw = reinterpret_cast<const std::uint8_t*>(sk.s.data());
  out.emplace_back(raw, raw + sk.s.size());
  const std::size_t n = sk.context->degree();
  for (std::size_t i = 0; i * n < sk.s_ntt.size(); ++i) {
    ByteWriter w;
    w.words(std::span(sk.s_ntt).subspan(i * n, n));
    out.push_back(w.take());
  }
  return out;
}

struct Run {
  proto::Transcript transcript;
  std::vector<std::string> texts;
  std::vector<std::uint8_t> server_state;
  std::vector<std::vector<std::uint8_t>> secrets;
  proto::LatencyReport latency;
};

Run run_session(bool loopback, const DecodeGraph& graph) {
  const auto& params = he::parameter_set("mid4096");
  proto::ServerConfig scfg;
  scfg.model = he::compile_for_he(scoring_model(81), 8, 8);
  scfg.supported = {params};
  proto::Server server(scfg);
  proto::ClientConfig ccfg;
  ccfg.params = params;
  ccfg.seed = 82;
  ccfg.batch_size = 8;
  ccfg.softmax = true;
  proto::ClientSession session(ccfg);

  Run run;
  auto drive = [&](proto::Channel& channel) {
    proto::Client client(session, channel, &run.transcript);
    client.handshake();
    for (std::size_t u = 0; u < 3; ++u) {
      const auto r = client.run_utterance(frames(12, 12, 83 + u), &graph);
      run.texts.push_back(r.transcript);
      run.latency.add({proto::to_hex(session.id()), u, r.frames.size(), r.latency});
    }
    client.close();
  };
  if (loopback) {
    proto::TcpListener listener({"127.0.0.1", 0});
    std::thread worker([&] { proto::serve_tcp(server, listener, 1); });
    {
      auto channel = proto::TcpChannel::connect({"127.0.0.1", listener.port()});
      drive(*channel);
    }
    worker.join();
  } else {
    proto::InProcessChannel channel(server);
    drive(channel);
    run.server_state = channel.connection().session().serialize();
  }
  run.secrets = secret_images(session.keys().sk);
  return run;
}

Outcome key_confinement_and_transport() {
  DecodeGraph graph = DecodeGraph::uniform(4);
  graph.labels = {"sil", "a", "b", "c"};
  const Run local = run_session(false, graph);
  const Run remote = run_session(true, graph);

  bool leaked = false;
  for (const auto& image : local.secrets) {
    if (contains(local.server_state, image)) leaked = true;
    for (const auto& f : local.transcript.frames)
      if (contains(f, image)) leaked = true;
  }
  const bool same = local.transcript.frames == remote.transcript.frames && local.texts == remote.texts;

  bool positive = true;
  for (const auto& row : local.latency.rows()) {
    const auto& l = row.ms;
    for (double v : {l.encryption_ms, l.am_scoring_ms, l.decryption_ms, l.decoding_ms, l.overall_ms})
      if (!(v > 0.0)) positive = false;
  }
  const auto mean = local.latency.mean();
  return {!leaked && same && positive,
          format("server state %zu bytes and %zu messages scanned for %zu secret images: %s; in-process vs loopback "
                 "transcripts %s (%zu messages); latency ms enc %.1f, scoring %.1f, dec %.2f, decoding %.3f, "
                 "overall %.1f",
                 local.server_state.size(), local.transcript.frames.size(), local.secrets.size(),
                 leaked ? "LEAK" : "clean", same ? "identical" : "DIFFER", local.transcript.frames.size(),
                 mean.encryption_ms, mean.am_scoring_ms, mean.decryption_ms, mean.decoding_ms, mean.overall_ms)};
}

double log_normalized(Rng& rng, std::vector<double>& row) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  double sum = 0;
  for (auto& v : row) sum += v = u(rng);
  for (auto& v : row) v = std::log(v / sum);
  return sum;
}

Outcome viterbi_exactness() {
  constexpr int kInstances = 600;
  Rng rng(91);
  std::normal_distribution<double> score(0.0, 2.0);
  int mismatches = 0;
  for (int i = 0; i < kInstances; ++i) {
    const std::size_t n = 1 + static_cast<std::size_t>(i % 4), t = 1 + static_cast<std::size_t>((i / 4) % 6);
    DecodeGraph g = DecodeGraph::uniform(n);
    for (std::size_t s = 0; s < n; ++s) {
      std::vector<double> row(n);
      log_normalized(rng, row);
      // occasionally forbid an arc, keeping the row a distribution
      if (n > 1 && rng() % 4 == 0) {
        const std::size_t cut = rng() % n;
        const double keep = std::log1p(-std::exp(row[cut]));
        row[cut] = -INFINITY;
        for (auto& v : row) v -= keep;
      }
      std::copy(row.begin(), row.end(), g.log_transitions.begin() + static_cast<std::ptrdiff_t>(s * n));
    }
    log_normalized(rng, g.log_initial);
    std::vector<PosteriorFrame> frames(t);
    for (std::size_t f = 0; f < t; ++f) {
      frames[f].frame_index = f;
      for (std::size_t s = 0; s < n; ++s) frames[f].scores.push_back(score(rng));
    }

    // exhaustive enumeration of all n^t paths with the same summation order
    double best = -INFINITY;
    std::vector<std::size_t> path(t, 0);
    for (;;) {
      double s = g.log_initial[path[0]] + frames[0].scores[path[0]];
      for (std::size_t f = 1; f < t; ++f) {
        s += g.log_transitions[path[f - 1] * n + path[f]];
        s += frames[f].scores[path[f]];
      }
      best = std::max(best, s);
      std::size_t k = t;
      while (k > 0 && path[k - 1] == n - 1) path[--k] = 0;
      if (k == 0) break;
      ++path[k - 1];
    }
    const auto v = viterbi(frames, g);
    if (v.log_score != best || path_score(frames, g, v.path) != best) ++mismatches;
  }
  return {mismatches == 0, format("%d instances with N <= 4, T <= 6, %d score mismatches", kInstances, mismatches)};
}

}  // namespace

std::vector<Criterion> protocol_criteria() {
  return {{8, "key confinement, transport equivalence and latency report", key_confinement_and_transport},
          {9, "Viterbi equals exhaustive search", viterbi_exactness}};
}

}  // namespace polyscore::acceptance
