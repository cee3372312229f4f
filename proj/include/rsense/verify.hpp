#pragma once

#include <string>
#include <vector>

#include "rsense/common.hpp"

namespace rsense {

struct VerifyOptions {
  Seed seed = 1;
  /// Test hook: hands finite_diff_check a gradient with its sign flipped.
  bool inject_grad_sign_flip = false;
};

struct InvariantResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Runs the cross-module invariant suite on small instances.
std::vector<InvariantResult> run_verification(const VerifyOptions& options = {});

}  // namespace rsense
