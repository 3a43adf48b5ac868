#include "protocol/client.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace polyscore::proto {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) { return std::chrono::duration<double, std::milli>(Clock::now() - t).count(); }

LatencyBreakdown combine(const std::vector<UtteranceTiming>& rows, bool median) {
  LatencyBreakdown out;
  if (rows.empty()) return out;
  auto stat = [&](double LatencyBreakdown::*field) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r.ms.*field);
    if (!median) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    }
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };
  out.encryption_ms = stat(&LatencyBreakdown::encryption_ms);
  out.am_scoring_ms = stat(&LatencyBreakdown::am_scoring_ms);
  out.decryption_ms = stat(&LatencyBreakdown::decryption_ms);
  out.decoding_ms = stat(&LatencyBreakdown::decoding_ms);
  out.overall_ms = stat(&LatencyBreakdown::overall_ms);
  return out;
}

}  // namespace

LatencyBreakdown LatencyReport::mean() const { return combine(rows_, false); }
LatencyBreakdown LatencyReport::median() const { return combine(rows_, true); }

std::string LatencyReport::csv() const {
  std::ostringstream os;
  os << "session,utterance,frames,encryption_ms,am_scoring_ms,decryption_ms,decoding_ms,overall_ms\n";
  os << std::fixed << std::setprecision(3);
  for (const auto& r : rows_)
    os << r.session << ',' << r.utterance << ',' << r.frames << ',' << r.ms.encryption_ms << ','
       << r.ms.am_scoring_ms << ',' << r.ms.decryption_ms << ',' << r.ms.decoding_ms << ',' << r.ms.overall_ms << '\n';
  return os.str();
}

std::string LatencyReport::table() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << std::left << std::setw(10) << "" << std::right << std::setw(12) << "encryption" << std::setw(12)
     << "am_scoring" << std::setw(12) << "decryption" << std::setw(12) << "decoding" << std::setw(12) << "overall"
     << "\n";
  auto line = [&](const std::string& name, const LatencyBreakdown& b) {
    os << std::left << std::setw(10) << name << std::right << std::setw(12) << b.encryption_ms << std::setw(12)
       << b.am_scoring_ms << std::setw(12) << b.decryption_ms << std::setw(12) << b.decoding_ms << std::setw(12)
       << b.overall_ms << "\n";
  };
  line("mean ms", mean());
  line("median ms", median());
  return os.str();
}

WireMessage Client::exchange(const WireMessage& out) {
  auto frame = encode_frame(out);
  channel_.send(frame);
  if (transcript_) transcript_->frames.push_back(std::move(frame));
  auto in = channel_.receive();
  if (transcript_) transcript_->frames.push_back(in);
  return decode_frame(in);
}

void Client::handshake() {
  session_.accept_hello(exchange(session_.hello()));
  session_.accept_eval_keys(exchange(session_.eval_keys()));
}

UtteranceResult Client::run_utterance(const std::vector<std::vector<double>>& frames, const DecodeGraph* graph) {
  require(!frames.empty(), ErrorCode::InvalidArgument, "utterance has no frames");
  UtteranceResult out;
  auto& lat = out.latency;
  const auto start = Clock::now();

  auto t = Clock::now();
  const auto encoded = session_.encode(frames, next_frame_);
  lat.encryption_ms += ms_since(t);
  next_frame_ += frames.size();

  const std::size_t batch = session_.batch_size();
  for (std::size_t begin = 0; begin < frames.size(); begin += batch) {
    const std::size_t end = std::min(frames.size(), begin + batch);
    t = Clock::now();
    const auto request = session_.encrypt_batch(encoded, begin, end);
    lat.encryption_ms += ms_since(t);

    t = Clock::now();
    const auto reply = exchange(request);
    lat.am_scoring_ms += ms_since(t);

    t = Clock::now();
    for (auto& f : session_.read_posteriors(reply)) out.frames.push_back(std::move(f));
    lat.decryption_ms += ms_since(t);
  }

  t = Clock::now();
  std::vector<PosteriorFrame> scores;
  scores.reserve(out.frames.size());
  for (const auto& f : out.frames) {
    out.flagged += f.flagged ? 1 : 0;
    PosteriorFrame p = f.frame;
    // Probabilities become log-potentials; raw scores already are.
    if (session_.softmax_enabled())
      for (auto& v : p.scores) v = std::log(std::max(v, 1e-300));
    scores.push_back(std::move(p));
  }
  if (graph) {
    out.path = viterbi(scores, *graph).path;
    out.transcript = transcript(out.path, *graph);
  } else {
    out.path = framewise_argmax(scores);
    out.transcript = transcript(out.path, DecodeGraph::uniform(session_.server_info().output_dim));
  }
  lat.decoding_ms += ms_since(t);
  lat.overall_ms = ms_since(start);
  return out;
}

void Client::close() { session_.accept_bye(exchange(session_.bye())); }

}  // namespace polyscore::proto
