#include "trainer/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "common/error.hpp"
#include "trainer/trainer.hpp"

namespace polyscore::train {

std::string BenchResult::csv() const {
  std::string out = "row";
  for (int b : bits) out += "," + std::to_string(b) + "-bit";
  out += "\n";
  char buf[32];
  auto row = [&](const char* name, auto value) {
    out += name;
    for (std::size_t i = 0; i < bits.size(); ++i) {
      std::snprintf(buf, sizeof buf, ",%.4f", value(i));
      out += buf;
    }
    out += "\n";
  };
  row("float-relu", [&](std::size_t) { return relu; });
  row("float-dpn", [&](std::size_t) { return dpn; });
  row("quantize-only", [&](std::size_t i) { return quantize_only[i]; });
  row("quantize+retrain", [&](std::size_t i) { return retrained[i]; });
  return out;
}

bool BenchResult::quantize_only_monotone() const {
  std::vector<std::size_t> order(bits.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return bits[a] > bits[b]; });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (quantize_only[order[i]] > quantize_only[order[i - 1]]) return false;
  return true;
}

BenchResult run_bench(const BenchConfig& cfg) {
  require(!cfg.bits.empty(), ErrorCode::Config, "bench needs at least one bit width");
  require(cfg.retrain_epochs >= 0, ErrorCode::Config, "retrain epochs must be non-negative");
  const auto task = make_toy_task(cfg.task_seed);
  BenchResult r;
  r.bits = cfg.bits;

  TrainConfig tc;
  tc.seed = cfg.seed;
  tc.learning_rate = 0.02;
  const std::size_t dims = task.dims, classes = task.classes;
  const auto relu = train_float(make_mlp(dims, {32, 32, 32}, classes, LayerKind::ReLU, cfg.seed + 1), task.train,
                                nullptr, tc, tc.float_epochs);
  r.relu = evaluate(relu, task.test).accuracy;

  tc.learning_rate = 0.003;
  tc.max_grad_norm = 1.0;
  tc.retrain_epochs = cfg.retrain_epochs;
  TrainReport report;
  const auto dpn = train_float(convert_to_dpn(relu), task.train, nullptr, tc, tc.float_epochs, &report);
  r.dpn = evaluate(dpn, task.test).accuracy;

  for (int bits : cfg.bits) {
    tc.bits = bits;
    const auto m = fit_and_retrain(dpn, task.train, &task.test, tc, report);
    r.quantize_only.push_back(m.report.last(Phase::CodebookFit)->heldout_accuracy);
    r.retrained.push_back(m.report.epochs.back().heldout_accuracy);
  }
  return r;
}

}  // namespace polyscore::train
