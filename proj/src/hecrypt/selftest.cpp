#include "hecrypt/selftest.hpp"

#include <random>
#include <sstream>

#include "common/random.hpp"
#include "hecrypt/bfv.hpp"

namespace polyscore::he {

namespace {

struct Party {
  SessionKeys keys;
  Encryptor enc;
  Decryptor dec;
  Evaluator ev;

  Party(const HeParams& p, std::uint64_t seed)
      : keys(keygen(p, seed)),
        enc(keys.pk, seed + 1),
        dec(keys.sk),
        ev(keys.pk.context, std::make_shared<EvalKey>(keys.ek)) {}
};

}  // namespace

std::string DifferentialReport::summary() const {
  std::ostringstream os;
  os << params << ": " << sequences << " sequences, " << operations << " operations, " << compared
     << " decryptions compared, " << value_mismatches << " value mismatches, " << budget_mismatches
     << " budget mismatches, " << optimistic_budgets << " optimistic budgets";
  return os.str();
}

DifferentialReport sim_real_differential(const HeParams& params, std::size_t sequences, std::uint64_t seed) {
  HeParams real_params = params;
  real_params.backend = Backend::Bfv;
  Party real(real_params, seed), sim(simulated(real_params), seed);
  DifferentialReport report;
  report.params = real_params.name;
  Rng rng(seed ^ 0x5bd1e995);
  const std::uint64_t t = real_params.t;
  std::uniform_int_distribution<std::uint64_t> message(0, t - 1), small(0, 999);
  std::uniform_int_distribution<int> op(0, 3);
  const int depth = NoiseModel::for_params(real_params).depth_capacity();
  for (std::size_t seq = 0; seq < sequences; ++seq, ++report.sequences) {
    const std::uint64_t m0 = message(rng);
    auto r = real.enc.encrypt(m0);
    auto s = sim.enc.encrypt(m0);
    int squares = 0;
    for (int step = 0; step < 6; ++step) {
      const std::uint64_t v = small(rng);
      switch (op(rng)) {
        case 0:
          r = real.ev.add(r, real.enc.encrypt(v));
          s = sim.ev.add(s, sim.enc.encrypt(v));
          break;
        case 1:
          r = real.ev.add_plain(r, v);
          s = sim.ev.add_plain(s, v);
          break;
        case 2:
          r = real.ev.mul_plain(r, v);
          s = sim.ev.mul_plain(s, v);
          break;
        default:
          if (squares >= depth) continue;
          ++squares;
          r = real.ev.square(r);
          s = sim.ev.square(s);
      }
      ++report.operations;
      if (r.noise_budget != s.noise_budget) ++report.budget_mismatches;
      const double measured = real.dec.measured_budget(r);
      if (r.noise_budget > 0.0 && measured <= 0.0) ++report.optimistic_budgets;
      if (measured <= 0.0) break;
      ++report.compared;
      if (real.dec.decrypt_unchecked(r) != sim.dec.decrypt_unchecked(s)) ++report.value_mismatches;
    }
  }
  return report;
}

}  // namespace polyscore::he
