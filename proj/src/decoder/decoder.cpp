#include "decoder/decoder.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "common/error.hpp"

namespace polyscore {

namespace {

double log_sum_exp(const double* v, std::size_t n) {
  double hi = -INFINITY;
  for (std::size_t i = 0; i < n; ++i) hi = std::max(hi, v[i]);
  if (hi == -INFINITY) return hi;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::exp(v[i] - hi);
  return hi + std::log(acc);
}

void check_frames(const std::vector<PosteriorFrame>& frames, const DecodeGraph& graph) {
  require(!frames.empty(), ErrorCode::InvalidArgument, "no frames to decode");
  std::size_t need = 0;
  for (auto e : graph.emission_index) need = std::max(need, e + 1);
  for (const auto& f : frames) {
    require(f.scores.size() >= need, ErrorCode::ShapeMismatch,
            "frame " + std::to_string(f.frame_index) + " has " + std::to_string(f.scores.size()) +
                " scores, graph needs " + std::to_string(need));
    for (double v : f.scores) require(std::isfinite(v), ErrorCode::NonFinite, "non-finite score");
  }
}

double read_real(std::istream& in) {
  std::string tok;
  require(static_cast<bool>(in >> tok), ErrorCode::Config, "graph file: expected a number");
  if (tok == "-inf" || tok == "-Inf" || tok == "-INF") return -INFINITY;
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    require(used == tok.size(), ErrorCode::Config, "graph file: bad number '" + tok + "'");
    return v;
  } catch (const std::logic_error&) {
    raise(ErrorCode::Config, "graph file: bad number '" + tok + "'");
  }
}

}  // namespace

void DecodeGraph::validate() const {
  require(states > 0, ErrorCode::InvalidArgument, "graph needs at least one state");
  require(log_transitions.size() == states * states, ErrorCode::ShapeMismatch, "transition matrix must be N x N");
  require(log_initial.size() == states, ErrorCode::ShapeMismatch, "initial vector must have N entries");
  require(labels.size() == states, ErrorCode::ShapeMismatch, "one label per state expected");
  require(emission_index.size() == states, ErrorCode::ShapeMismatch, "one emission index per state expected");
  for (double v : log_transitions) require(!std::isnan(v) && v != INFINITY, ErrorCode::NonFinite, "bad log transition");
  for (double v : log_initial) require(!std::isnan(v) && v != INFINITY, ErrorCode::NonFinite, "bad log initial");
  for (std::size_t i = 0; i < states; ++i) {
    const double s = std::exp(log_sum_exp(log_transitions.data() + i * states, states));
    require(std::fabs(s - 1.0) <= 1e-9, ErrorCode::InvalidArgument,
            "transition row " + std::to_string(i) + " does not sum to 1");
  }
  require(std::fabs(std::exp(log_sum_exp(log_initial.data(), states)) - 1.0) <= 1e-9, ErrorCode::InvalidArgument,
          "initial distribution does not sum to 1");
}

DecodeGraph DecodeGraph::uniform(std::size_t states) {
  require(states > 0, ErrorCode::InvalidArgument, "graph needs at least one state");
  DecodeGraph g;
  g.states = states;
  const double lp = -std::log(static_cast<double>(states));
  g.log_transitions.assign(states * states, lp);
  g.log_initial.assign(states, lp);
  for (std::size_t i = 0; i < states; ++i) {
    g.labels.push_back(std::to_string(i));
    g.emission_index.push_back(i);
  }
  return g;
}

ViterbiResult viterbi(const std::vector<PosteriorFrame>& frames, const DecodeGraph& graph) {
  graph.validate();
  check_frames(frames, graph);
  const std::size_t n = graph.states, steps = frames.size();
  std::vector<double> delta(n), next(n);
  std::vector<std::size_t> back(steps * n, 0);
  for (std::size_t s = 0; s < n; ++s) delta[s] = graph.log_initial[s] + frames[0].scores[graph.emission_index[s]];
  for (std::size_t t = 1; t < steps; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      double best = -INFINITY;
      std::size_t arg = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = delta[i] + graph.transition(i, j);
        if (v > best) {
          best = v;
          arg = i;
        }
      }
      next[j] = best + frames[t].scores[graph.emission_index[j]];
      back[t * n + j] = arg;
    }
    delta.swap(next);
  }
  ViterbiResult r;
  std::size_t last = 0;
  for (std::size_t s = 1; s < n; ++s)
    if (delta[s] > delta[last]) last = s;
  r.log_score = delta[last];
  require(r.log_score > -INFINITY, ErrorCode::InvalidArgument, "no path has nonzero probability");
  r.path.assign(steps, 0);
  r.path[steps - 1] = last;
  for (std::size_t t = steps - 1; t > 0; --t) r.path[t - 1] = back[t * n + r.path[t]];
  return r;
}

double path_score(const std::vector<PosteriorFrame>& frames, const DecodeGraph& graph,
                  const std::vector<std::size_t>& path) {
  require(path.size() == frames.size() && !path.empty(), ErrorCode::ShapeMismatch, "path length must match frames");
  for (auto s : path) require(s < graph.states, ErrorCode::InvalidArgument, "state out of range");
  double score = graph.log_initial[path[0]] + frames[0].scores[graph.emission_index[path[0]]];
  // Same association as the Viterbi recursion, so the decoded path scores identically.
  for (std::size_t t = 1; t < path.size(); ++t)
    score = score + graph.transition(path[t - 1], path[t]) + frames[t].scores[graph.emission_index[path[t]]];
  return score;
}

std::vector<std::size_t> framewise_argmax(const std::vector<PosteriorFrame>& frames) {
  require(!frames.empty(), ErrorCode::InvalidArgument, "no frames to decode");
  std::vector<std::size_t> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    require(!f.scores.empty(), ErrorCode::ShapeMismatch, "frame has no scores");
    std::size_t best = 0;
    for (std::size_t i = 1; i < f.scores.size(); ++i)
      if (f.scores[i] > f.scores[best]) best = i;
    out.push_back(best);
  }
  return out;
}

DecodeGraph parse_graph(std::istream& in) {
  DecodeGraph g;
  std::string line;
  bool have_initial = false, have_transitions = false;
  std::stringstream body;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    body << line << '\n';
  }
  std::string key;
  while (body >> key) {
    if (key == "states") {
      long long n;
      require(static_cast<bool>(body >> n) && n > 0 && n <= 4096, ErrorCode::Config, "graph file: bad state count");
      g.states = static_cast<std::size_t>(n);
    } else if (g.states == 0) {
      raise(ErrorCode::Config, "graph file: 'states' must come first");
    } else if (key == "labels") {
      g.labels.resize(g.states);
      for (auto& l : g.labels) require(static_cast<bool>(body >> l), ErrorCode::Config, "graph file: missing label");
    } else if (key == "emissions") {
      g.emission_index.resize(g.states);
      for (auto& e : g.emission_index) {
        long long v;
        require(static_cast<bool>(body >> v) && v >= 0, ErrorCode::Config, "graph file: bad emission index");
        e = static_cast<std::size_t>(v);
      }
    } else if (key == "initial") {
      g.log_initial.resize(g.states);
      for (auto& v : g.log_initial) v = read_real(body);
      have_initial = true;
    } else if (key == "transitions") {
      g.log_transitions.resize(g.states * g.states);
      for (auto& v : g.log_transitions) v = read_real(body);
      have_transitions = true;
    } else {
      raise(ErrorCode::Config, "graph file: unknown key '" + key + "'");
    }
  }
  require(g.states > 0 && have_initial && have_transitions, ErrorCode::Config,
          "graph file needs states, initial and transitions");
  if (g.labels.empty())
    for (std::size_t i = 0; i < g.states; ++i) g.labels.push_back(std::to_string(i));
  if (g.emission_index.empty())
    for (std::size_t i = 0; i < g.states; ++i) g.emission_index.push_back(i);
  try {
    g.validate();
  } catch (const Error& e) {
    raise(ErrorCode::Config, std::string("graph file: ") + e.what());
  }
  return g;
}

DecodeGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open graph file " + path);
  return parse_graph(in);
}

std::string format_graph(const DecodeGraph& graph) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "states " << graph.states << "\nlabels";
  for (const auto& l : graph.labels) os << ' ' << l;
  os << "\nemissions";
  for (auto e : graph.emission_index) os << ' ' << e;
  auto put = [&](double v) {
    if (v == -INFINITY) {
      os << " -inf";
    } else {
      os << ' ' << v;
    }
  };
  os << "\ninitial";
  for (double v : graph.log_initial) put(v);
  os << "\ntransitions\n";
  for (std::size_t i = 0; i < graph.states; ++i) {
    for (std::size_t j = 0; j < graph.states; ++j) put(graph.transition(i, j));
    os << '\n';
  }
  return os.str();
}

std::string transcript(const std::vector<std::size_t>& path, const DecodeGraph& graph) {
  std::string out;
  const std::string* prev = nullptr;
  for (auto s : path) {
    require(s < graph.labels.size(), ErrorCode::InvalidArgument, "state out of range");
    const std::string& l = graph.labels[s];
    if (prev && *prev == l) continue;
    if (!out.empty()) out += ' ';
    out += l;
    prev = &l;
  }
  return out;
}

}  // namespace polyscore
