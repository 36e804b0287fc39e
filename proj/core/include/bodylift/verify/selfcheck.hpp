#pragma once

#include <functional>
#include <string>
#include <vector>

namespace bodylift::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;      // worst error observed
  double tolerance = 0.0;
  std::string detail;
};

struct GradientCase {
  std::string name;
  double max_rel_error = 0.0;
};

/// Finite-difference battery over every layer, loss and network entry point.
/// Each family is checked on `configs` random shapes/seeds.
std::vector<GradientCase> gradient_battery(std::size_t configs = 20, double eps = 1e-5);

struct MetricOracleSummary {
  double p1_max_diff = 0.0;
  double p2_max_diff = 0.0;
  double pck_max_diff = 0.0;
  double auc_max_diff = 0.0;
  double p2_similarity_max = 0.0;  // P2 on similarity-transformed ground-truth copies
  std::size_t pairs = 0;
};

MetricOracleSummary metric_oracles(std::size_t pairs = 1000, std::uint64_t seed = 1);

/// Save → load → compare tensors and evaluation MPJPE. Returns the largest
/// MPJPE difference; tensors must match bit for bit or the result is +inf.
double checkpoint_roundtrip_error();

struct SelfCheckOptions {
  // Negative control: perturbs one analytic gradient so the battery must fail.
  bool inject_fault = false;
  std::size_t gradient_configs = 20;
  std::size_t metric_pairs = 1000;
};

std::vector<CheckResult> run_selfcheck(const SelfCheckOptions& options = {});

std::string format_results(const std::vector<CheckResult>& results);

}  // namespace bodylift::verify
