#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace filterlab {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  bool report_only = false;  // informational, never fails the suite
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool all_pass = true;
  double wall_seconds = 0.0;
};

// Runs the full property/invariant suite: orthonormality, sin-Theta oracle
// equivalence, Wedin/Weyl consistency, filter monotonicity and scale
// invariance, rho-invariance of recovered subspaces, determinism under
// varying thread counts, score-mixture identities, and metric invariances.
VerifyReport run_verification(std::uint64_t seed, int threads);

}  // namespace filterlab
