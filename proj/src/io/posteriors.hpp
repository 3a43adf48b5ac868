#pragma once

#include <string>
#include <vector>

#include "decoder/decoder.hpp"

namespace polyscore::io {

/// Decrypted scores of one utterance as written by `infer`.
struct PosteriorFile {
  std::size_t dims = 0;
  /// Scores are softmax probabilities rather than raw class scores.
  bool probabilities = false;
  std::vector<PosteriorFrame> frames;
  /// Frames whose decryption failed the noise checks (their scores are zero).
  std::vector<bool> flagged;
};

/// Text format: header "polyscore-posteriors 1 dims=<d> frames=<f> probabilities=<0|1>",
/// then one line per frame: index, flag, d scores.
std::string format_posteriors(const PosteriorFile& p);
PosteriorFile parse_posteriors(const std::string& text);

PosteriorFile load_posteriors(const std::string& path);
void save_posteriors(const std::string& path, const PosteriorFile& p);

/// Scores ready for Viterbi: log probabilities when the file holds probabilities.
std::vector<PosteriorFrame> decoding_scores(const PosteriorFile& p);

}  // namespace polyscore::io
