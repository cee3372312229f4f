#include <gtest/gtest.h>

#include <set>

#include "rsense/verify.hpp"

using namespace rsense;

TEST(Verify, AllInvariantsPass) {
  const std::vector<InvariantResult> results = run_verification();
  EXPECT_GE(results.size(), 12u);
  std::set<std::string> names;
  for (const auto& r : results) {
    EXPECT_TRUE(r.pass) << r.name << ": " << r.detail;
    names.insert(r.name);
  }
  EXPECT_EQ(names.size(), results.size());
}

TEST(Verify, SignFlipIsCaught) {
  VerifyOptions opts;
  opts.inject_grad_sign_flip = true;
  int failures = 0;
  for (const auto& r : run_verification(opts))
    if (!r.pass) {
      ++failures;
      EXPECT_NE(r.name.find("finite_diff"), std::string::npos) << r.name;
    }
  EXPECT_GT(failures, 0);
}
