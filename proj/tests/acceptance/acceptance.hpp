#pragma once

#include <functional>
#include <string>
#include <vector>

namespace polyscore::acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int number = 0;
  std::string name;
  std::function<Outcome()> run;
};

std::vector<Criterion> he_criteria();
std::vector<Criterion> model_criteria();
std::vector<Criterion> protocol_criteria();

/// Worker count for embarrassingly parallel loops.
unsigned worker_count();

}  // namespace polyscore::acceptance
