#include "io/posteriors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "common/error.hpp"
#include "io/files.hpp"

namespace polyscore::io {

namespace {
constexpr const char* kMagic = "polyscore-posteriors";

std::size_t header_field(const std::string& token, const std::string& key) {
  require(token.rfind(key + "=", 0) == 0, ErrorCode::Config, "posterior file: expected " + key + "=");
  try {
    std::size_t used = 0;
    const auto v = std::stoull(token.substr(key.size() + 1), &used);
    require(used == token.size() - key.size() - 1, ErrorCode::Config, "posterior file: bad " + key);
    return v;
  } catch (const std::logic_error&) {
    raise(ErrorCode::Config, "posterior file: bad " + key);
  }
}
}  // namespace

std::string format_posteriors(const PosteriorFile& p) {
  std::ostringstream os;
  os << kMagic << " 1 dims=" << p.dims << " frames=" << p.frames.size() << " probabilities=" << (p.probabilities ? 1 : 0)
     << "\n";
  char buf[32];
  for (std::size_t i = 0; i < p.frames.size(); ++i) {
    const auto& f = p.frames[i];
    require(f.scores.size() == p.dims, ErrorCode::ShapeMismatch, "posterior frame has the wrong dimension");
    os << f.frame_index << ' ' << (i < p.flagged.size() && p.flagged[i] ? 1 : 0);
    for (double v : f.scores) {
      std::snprintf(buf, sizeof buf, " %.17g", v);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

PosteriorFile parse_posteriors(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::Config, "posterior file: empty");
  std::istringstream head(line);
  std::string magic, dims, frames, probs;
  int version = 0;
  head >> magic >> version >> dims >> frames >> probs;
  require(magic == kMagic && version == 1, ErrorCode::Config, "posterior file: bad header");
  PosteriorFile p;
  p.dims = header_field(dims, "dims");
  const std::size_t count = header_field(frames, "frames");
  const std::size_t prob = header_field(probs, "probabilities");
  require(p.dims > 0 && prob <= 1, ErrorCode::Config, "posterior file: bad header");
  p.probabilities = prob == 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    PosteriorFrame f;
    int flag = 0;
    require(static_cast<bool>(row >> f.frame_index >> flag) && (flag == 0 || flag == 1), ErrorCode::Config,
            "posterior file: malformed frame line");
    std::string tok;
    while (row >> tok) {
      try {
        std::size_t used = 0;
        f.scores.push_back(std::stod(tok, &used));
        require(used == tok.size(), ErrorCode::Config, "posterior file: bad score '" + tok + "'");
      } catch (const std::logic_error&) {
        raise(ErrorCode::Config, "posterior file: bad score '" + tok + "'");
      }
    }
    require(f.scores.size() == p.dims, ErrorCode::Config, "posterior file: frame has the wrong number of scores");
    p.frames.push_back(std::move(f));
    p.flagged.push_back(flag == 1);
  }
  require(p.frames.size() == count, ErrorCode::Config, "posterior file: frame count does not match the header");
  return p;
}

PosteriorFile load_posteriors(const std::string& path) { return parse_posteriors(read_text(path)); }

void save_posteriors(const std::string& path, const PosteriorFile& p) { write_text(path, format_posteriors(p)); }

std::vector<PosteriorFrame> decoding_scores(const PosteriorFile& p) {
  auto frames = p.frames;
  if (p.probabilities)
    for (auto& f : frames)
      for (auto& v : f.scores) v = std::log(std::max(v, 1e-300));
  return frames;
}

}  // namespace polyscore::io
