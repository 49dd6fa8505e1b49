#pragma once

// Command dispatch for the `bt` tool: solve, generate, verify, heatmap and
// suite. Commands run in-process and report through an exit code.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bt/reg_solver.hpp"

namespace bt {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitNotConverged = 2;
inline constexpr int kExitNotBalanced = 3;

struct RunReport {
  int exit_status = kExitOk;
  std::string status;
  std::vector<StageSummary> stages;
  double final_criterion = 0.0;
  std::optional<double> objective;
  std::optional<double> duality_gap;
  std::vector<std::filesystem::path> outputs;
};

std::string report_to_json(const RunReport& report);

/// Parses `stages=<k>,factor=<f>,final=<eta>` into an annealing schedule.
AnnealingSchedule parse_schedule(const std::string& text, double tol);

/// `args` excludes the program name. Diagnostics go to `err`, results to `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bt
