#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <string>
#include <thread>

#include "acceptance.hpp"
#include "common/error.hpp"

namespace polyscore::acceptance {

unsigned worker_count() {
  if (const char* env = std::getenv("POLYSCORE_THREADS")) return std::max(1, std::atoi(env));
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace polyscore::acceptance

int main(int argc, char** argv) {
  using namespace polyscore::acceptance;
  // Optional arguments select criteria by number.
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  std::vector<Criterion> all;
  for (auto group : {he_criteria, model_criteria, protocol_criteria})
    for (auto& c : group()) all.push_back(std::move(c));
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.number < b.number; });

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.number, c.name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
