#include "trainer/dataset.hpp"

#include <cmath>
#include <random>

#include "common/error.hpp"
#include "common/random.hpp"

namespace polyscore::train {

void LabeledFrames::validate() const {
  frames.validate();
  require(frames.rank() >= 2 && frames.shape[0] == labels.size(), ErrorCode::ShapeMismatch,
          "frame count does not match label count");
}

ToyTask make_toy_task(std::uint64_t seed, const ToyTaskConfig& cfg) {
  require(cfg.classes >= 2 && cfg.dims > 0 && cfg.modes_per_class > 0, ErrorCode::InvalidArgument,
          "toy task needs at least two classes, one dimension and one mode");
  require(cfg.train_frames % cfg.classes == 0 && cfg.test_frames % cfg.classes == 0, ErrorCode::InvalidArgument,
          "frame counts must be multiples of the class count");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_mode(0, cfg.modes_per_class - 1);

  std::vector<double> centres(cfg.classes * cfg.modes_per_class * cfg.dims);
  for (auto& c : centres) c = cfg.mean_spread * gauss(rng);

  auto generate = [&](std::size_t count) {
    LabeledFrames out;
    out.frames = Tensor({count, cfg.dims});
    out.labels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t label = i % cfg.classes;
      const std::size_t mode = pick_mode(rng);
      const double* centre = &centres[(label * cfg.modes_per_class + mode) * cfg.dims];
      for (std::size_t d = 0; d < cfg.dims; ++d) out.frames[i * cfg.dims + d] = centre[d] + cfg.noise * gauss(rng);
      out.labels[i] = label;
    }
    return out;
  };

  ToyTask task;
  task.classes = cfg.classes;
  task.dims = cfg.dims;
  task.train = generate(cfg.train_frames);
  task.test = generate(cfg.test_frames);

  std::vector<double> mean(cfg.dims, 0.0), sd(cfg.dims, 0.0);
  const auto n = static_cast<double>(cfg.train_frames);
  for (std::size_t i = 0; i < cfg.train_frames; ++i)
    for (std::size_t d = 0; d < cfg.dims; ++d) mean[d] += task.train.frames[i * cfg.dims + d] / n;
  for (std::size_t i = 0; i < cfg.train_frames; ++i)
    for (std::size_t d = 0; d < cfg.dims; ++d) {
      const double e = task.train.frames[i * cfg.dims + d] - mean[d];
      sd[d] += e * e / n;
    }
  for (auto& s : sd) s = std::sqrt(s);
  for (auto* set : {&task.train, &task.test}) {
    auto& f = set->frames.data;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const auto d = i % cfg.dims;
      f[i] = (f[i] - mean[d]) / sd[d];
    }
  }
  return task;
}

}  // namespace polyscore::train
