#pragma once

#include <string>
#include <vector>

#include "opfdl/case_io.hpp"
#include "opfdl/physics.hpp"

namespace opfdl {

struct ProjectionResult {
  OperatingPoint pt;
  bool converged = false;
  int iterations = 0;
  double h_inf = 0.0;  // residual at exit, non-reference equations
};

// Newton-Raphson solve of the balance equations for v in rectangular
// coordinates. Predicted s stays fixed everywhere except the reference bus,
// whose injection closes the remaining mismatch; the reference voltage is
// pinned to its predicted value. Initialized at the predicted v.
ProjectionResult project_to_powerflow(const PowerSystem& sys, const VecXcd& r,
                                      const OperatingPoint& prediction,
                                      double tol = 1e-8, int max_iter = 50);

// Inequality slacks divided by their range denominators, clamped below at 0.
// A zero-range denominator falls back to the absolute violation.
VecXd normalized_violations(const PowerSystem& sys, const OperatingPoint& pt,
                            const BranchFlows& flows);
VecXd normalized_violations(const PowerSystem& sys, const OperatingPoint& pt);

// The six reported violation blocks, grouping the SlackLayout bound pairs.
inline constexpr int kReportBlocks = 6;
extern const char* const kReportBlockNames[kReportBlocks];

struct SampleMetrics {
  int sample_id = 0;
  bool has_optgap = false;
  double optgap = 0.0;           // C(projected)/C(label) - 1
  double mean_violation = 0.0;   // ||eps_hat||_1 / (6N+4M), projected point
  double max_violation = 0.0;
  double invariant_metric = 0.0;  // unprojected prediction
  double cost_projected = 0.0;
  bool nr_converged = false;
  int nr_iterations = 0;
  double block_mean[kReportBlocks] = {};
  double block_max[kReportBlocks] = {};
};

// label_cost < 0 means no label (optgap omitted). cost_bar normalizes the
// invariant metric's cost term (mean training-label cost).
SampleMetrics sample_metrics(const PowerSystem& sys, const VecXcd& r,
                             const OperatingPoint& prediction,
                             double label_cost, double cost_bar,
                             int sample_id = 0);

struct AggregateRow {
  std::string metric;
  double mean = 0.0, std_dev = 0.0, p95 = 0.0, max = 0.0;
};

// Population statistics per metric; the optgap row appears only when at
// least one sample carries a label.
std::vector<AggregateRow> aggregate(const std::vector<SampleMetrics>& metrics);

// 95th percentile by linear interpolation between order statistics.
double percentile95(std::vector<double> values);

void write_per_sample_csv(const std::string& path,
                          const std::vector<SampleMetrics>& metrics);
void write_aggregate_csv(const std::string& path, const std::string& case_name,
                         const std::string& method,
                         const std::vector<AggregateRow>& rows);

}  // namespace opfdl
