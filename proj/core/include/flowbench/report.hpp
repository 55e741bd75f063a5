#pragma once

#include <string>
#include <vector>

namespace flowbench {

/// Aggregated final-step metrics across runs (typically seeds of one
/// configuration): mean and sample standard deviation per
/// (env, task, regime, metric, scope) group.
struct ReportRow {
  std::string env, task, regime, metric, scope;
  double mean = 0.0;
  double sd = 0.0;
  int runs = 0;
};

/// Collects metrics.csv files from run directories matching a glob
/// pattern ('*' wildcards, matched against the run directory path) and
/// aggregates each run's final step.
std::vector<ReportRow> aggregate_runs(const std::string& glob_pattern);

std::string report_to_csv(const std::vector<ReportRow>& rows);

/// Plain '*' glob match (no character classes).
bool glob_match(const std::string& pattern, const std::string& text);

}  // namespace flowbench
