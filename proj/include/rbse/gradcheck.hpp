#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rbse {

struct GradCheckConfig {
  std::size_t trials = 50;  // models per family in the finite-difference sweep
  std::uint64_t seed = 1;
  void validate() const;
};

struct CheckOutcome {
  std::string name;
  std::size_t cases = 0;
  double worst = 0.0;      // worst error observed, metric named by the check
  double threshold = 0.0;  // pass iff worst <= threshold
  bool pass = false;
};

struct GradCheckReport {
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  std::vector<CheckOutcome> checks;
  bool pass = false;  // every check passed

  std::string to_json() const;
};

// Sweeps the analytic formulas against brute-force enumeration: exact
// gradients vs central differences, posterior factorization, state
// normalization, the two partition-function routes, and the mixture
// log-likelihood identity. Setting RBSE_GRADCHECK_CORRUPT in the environment
// perturbs one exact gradient before comparison, forcing a failure; that is
// the hook acceptance tests use to prove the failure path stays wired up.
GradCheckReport run_gradcheck(const GradCheckConfig& cfg = {});

}  // namespace rbse
