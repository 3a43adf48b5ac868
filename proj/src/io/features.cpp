#include "io/features.hpp"

#include <cmath>
#include <sstream>

#include "common/bytes.hpp"
#include "io/files.hpp"

namespace polyscore::io {

namespace {
constexpr const char* kMagic = "polyscore-features";
}

std::vector<std::uint8_t> encode_features(const FeatureFile& f) {
  require(f.dims > 0, ErrorCode::InvalidArgument, "feature dimension must be positive");
  std::ostringstream head;
  head << kMagic << " 1 dims=" << f.dims << " frames=" << f.frames.size() << "\n";
  const std::string h = head.str();
  ByteWriter w;
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(h.data()), h.size()));
  for (const auto& frame : f.frames) {
    require(frame.size() == f.dims, ErrorCode::ShapeMismatch, "frame length differs from the feature dimension");
    for (double v : frame) {
      require(std::isfinite(v), ErrorCode::NonFinite, "non-finite feature value");
      w.f32(static_cast<float>(v));
    }
  }
  return w.take();
}

FeatureFile decode_features(const std::vector<std::uint8_t>& bytes) {
  std::size_t eol = 0;
  while (eol < bytes.size() && eol < 256 && bytes[eol] != '\n') ++eol;
  require(eol < bytes.size() && bytes[eol] == '\n', ErrorCode::Config, "feature file: missing header line");
  std::istringstream head(std::string(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(eol)));
  std::string magic, dims_tok, frames_tok;
  int version = 0;
  head >> magic >> version >> dims_tok >> frames_tok;
  require(magic == kMagic, ErrorCode::Config, "feature file: bad magic");
  require(version == 1, ErrorCode::Config, "feature file: unsupported version");
  require(dims_tok.rfind("dims=", 0) == 0 && frames_tok.rfind("frames=", 0) == 0, ErrorCode::Config,
          "feature file: malformed header");
  FeatureFile f;
  std::size_t frames = 0;
  try {
    f.dims = std::stoull(dims_tok.substr(5));
    frames = std::stoull(frames_tok.substr(7));
  } catch (const std::logic_error&) {
    raise(ErrorCode::Config, "feature file: malformed header");
  }
  require(f.dims > 0 && f.dims <= (1u << 20), ErrorCode::Config, "feature file: bad dimension");
  ByteReader r(std::span<const std::uint8_t>(bytes).subspan(eol + 1), ErrorCode::Config, "feature file");
  r.check(r.remaining() == frames * f.dims * 4, "payload size does not match the header");
  f.frames.assign(frames, std::vector<double>(f.dims));
  for (auto& frame : f.frames)
    for (auto& v : frame) {
      v = r.f32();
      r.check(std::isfinite(v), "non-finite feature value");
    }
  return f;
}

FeatureFile load_features(const std::string& path) { return decode_features(read_file(path)); }

void save_features(const std::string& path, const FeatureFile& f) { write_file(path, encode_features(f)); }

}  // namespace polyscore::io
