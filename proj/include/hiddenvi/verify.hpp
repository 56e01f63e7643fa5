#pragma once

#include <string>
#include <vector>

namespace hiddenvi {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyHooks {
  /// Test hook: perturbs one Jacobian entry so the finite-difference suite
  /// must fail. Used as the negative control.
  bool corrupt_jacobian = false;
};

/// Runs every invariant/property suite with a fixed built-in seed.
std::vector<CheckResult> run_verification(const VerifyHooks& hooks = {});

}  // namespace hiddenvi
