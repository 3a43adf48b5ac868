#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <vector>

namespace polyscore {

/// Decrypted scores for one frame, used directly as emission log-potentials.
struct PosteriorFrame {
  std::size_t frame_index = 0;
  std::vector<double> scores;
};

/// Small HMM: log transitions A[i][j] (row-major N x N), log initial
/// probabilities, a label per state and the score column each state reads.
struct DecodeGraph {
  std::size_t states = 0;
  std::vector<double> log_transitions;
  std::vector<double> log_initial;
  std::vector<std::string> labels;
  std::vector<std::size_t> emission_index;

  double transition(std::size_t from, std::size_t to) const { return log_transitions[from * states + to]; }
  /// Row sums of exp(A) and the sum of exp(pi) must be 1 within 1e-9.
  void validate() const;

  /// Uniform transitions and initial distribution; state i reads score i.
  static DecodeGraph uniform(std::size_t states);
};

struct ViterbiResult {
  std::vector<std::size_t> path;
  double log_score = 0.0;
};

/// Exact best path; ties go to the lower state index.
ViterbiResult viterbi(const std::vector<PosteriorFrame>& frames, const DecodeGraph& graph);

/// Score of a given state path under the same model viterbi maximizes.
double path_score(const std::vector<PosteriorFrame>& frames, const DecodeGraph& graph,
                  const std::vector<std::size_t>& path);

/// Per-frame argmax with ties to the lower index.
std::vector<std::size_t> framewise_argmax(const std::vector<PosteriorFrame>& frames);

/// Text graph format:
///   states N
///   labels l_0 ... l_{N-1}          (optional)
///   emissions e_0 ... e_{N-1}       (optional, score column per state)
///   initial p_0 ... p_{N-1}         (log probabilities, -inf allowed)
///   transitions                     (followed by N rows of N log probabilities)
/// Lines starting with '#' are comments.
DecodeGraph parse_graph(std::istream& in);
DecodeGraph load_graph(const std::string& path);
std::string format_graph(const DecodeGraph& graph);

/// Labels of the path with consecutive repeats merged, space separated.
std::string transcript(const std::vector<std::size_t>& path, const DecodeGraph& graph);

}  // namespace polyscore
