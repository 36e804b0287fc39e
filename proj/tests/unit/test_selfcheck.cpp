#include <gtest/gtest.h>

#include "bodylift/verify/selfcheck.hpp"

namespace bodylift::verify {
namespace {

TEST(SelfCheck, SmallBatteryPasses) {
  const auto cases = gradient_battery(2);
  ASSERT_FALSE(cases.empty());
  for (const auto& c : cases) EXPECT_LT(c.max_rel_error, 1e-4) << c.name;
}

TEST(SelfCheck, MetricOraclesAgree) {
  const MetricOracleSummary s = metric_oracles(100, 3);
  EXPECT_EQ(s.pairs, 100u);
  EXPECT_LT(s.p1_max_diff, 1e-9);
  EXPECT_LT(s.p2_max_diff, 1e-9);
  EXPECT_LT(s.pck_max_diff, 1e-9);
  EXPECT_LT(s.auc_max_diff, 1e-9);
  EXPECT_LT(s.p2_similarity_max, 1e-9);
}

TEST(SelfCheck, CheckpointRoundTripIsExact) { EXPECT_LT(checkpoint_roundtrip_error(), 1e-12); }

TEST(SelfCheck, InjectedFaultIsCaught) {
  SelfCheckOptions opt;
  opt.inject_fault = true;
  opt.gradient_configs = 2;
  opt.metric_pairs = 50;
  const auto results = run_selfcheck(opt);
  bool any_failed = false;
  for (const auto& r : results) any_failed = any_failed || !r.passed;
  EXPECT_TRUE(any_failed);
  EXPECT_NE(format_results(results).find("FAIL"), std::string::npos);
}

TEST(SelfCheck, CleanRunPasses) {
  SelfCheckOptions opt;
  opt.gradient_configs = 2;
  opt.metric_pairs = 50;
  for (const auto& r : run_selfcheck(opt)) EXPECT_TRUE(r.passed) << r.name << " " << r.detail;
}

}  // namespace
}  // namespace bodylift::verify
