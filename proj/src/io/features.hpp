#pragma once

#include <string>
#include <vector>

namespace polyscore::io {

/// One utterance of feature frames, frames x dims.
struct FeatureFile {
  std::size_t dims = 0;
  std::vector<std::vector<double>> frames;
};

/// Text header line "polyscore-features 1 dims=<d> frames=<f>\n" followed by
/// frames * dims little-endian float32 values, row-major.
std::vector<std::uint8_t> encode_features(const FeatureFile& f);
FeatureFile decode_features(const std::vector<std::uint8_t>& bytes);

FeatureFile load_features(const std::string& path);
void save_features(const std::string& path, const FeatureFile& f);

}  // namespace polyscore::io
