#pragma once

// Test problems and the reproduction suite: the sine grid, the 3x3 example
// with its known solution and stagnation matrices, and a driver that runs
// single-stage, annealed and trajectory experiments.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bt/core_model.hpp"
#include "bt/reg_solver.hpp"

namespace bt {

struct GridSpec {
  std::size_t size = 64;  // N, grid is N x N
  std::string weight_function = "paper-sine";
  std::string marginal_function = "abs-centered";
};

/// sin(4 pi ((x - 1/2)^2 + (y - 1/2)^2)).
double paper_sine_weight(double x, double y);

/// Cell-centre samples x_i = (i - 1/2)/N; r_i ~ |x_i - 1/2|, c_j ~ |y_j - 1/2|,
/// each normalised to total mass 1. Odd N puts a centre on 1/2 and is
/// rejected with ZeroMarginal.
OTProblem generate_grid(const GridSpec& spec);

/// The 3x3 maximization example with marginals r = (.25,.25,.5), c = (.2,.6,.2).
OTProblem small_example();
/// Its unique optimal plan.
Matrix small_example_solution();
/// Row-balanced matrices near which the iteration stalls on the 3x3 example,
/// in the order they are passed. IPFP started from any of them cycles.
std::vector<Matrix> stagnation_matrices();

/// 16 hex digits of FNV-1a over the dimensions, sense and raw bytes of the data.
std::string problem_digest(const OTProblem& problem);

struct TargetVisit {
  double min_distance = 0.0;  // smallest max-entry distance over the snapshots
  std::size_t closest_iteration = 0;  // where it is attained
  // First snapshot within the threshold after the previous target's visit.
  std::optional<std::size_t> ordered_visit;
};

struct TrajectoryReport {
  double eta = 0.0;
  double threshold = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<TargetVisit> targets;
  bool visited_in_order = false;  // every target has an ordered_visit
};

/// Scans snapshots for the targets. A target counts as visited when some
/// snapshot lies within `threshold` in max-entry distance; the ordered scan
/// looks for target k only after the visit of target k-1.
TrajectoryReport analyze_trajectory(const std::vector<PlanSnapshot>& snapshots,
                                    const std::vector<Matrix>& targets, double threshold);

/// Snapshot stride for trajectory studies: every iteration when n*m <= 100,
/// every 10th otherwise.
std::size_t trajectory_stride(const OTProblem& problem);

/// Single-stage solve with snapshots, followed by analyze_trajectory.
TrajectoryReport trajectory_study(const OTProblem& problem, double eta, double tol,
                                  std::size_t max_iters, const std::vector<Matrix>& targets,
                                  double threshold);

struct SuiteConfig {
  std::size_t grid_size = 64;
  std::vector<double> single_stage_etas{1e-2, 1e-3};
  double tol = 1e-2;
  std::size_t max_iters = kDefaultMaxIters;
  bool run_annealed = true;
  std::size_t anneal_stages = 12;
  double anneal_factor = 1.5;
  double anneal_final_eta = 1e-4;
  std::vector<double> trajectory_etas{1e-3, 1e-4};
  double trajectory_threshold = 0.05;
  // When set, traces and plans are written here.
  std::optional<std::filesystem::path> output_dir;
};

void validate(const SuiteConfig& config);

struct RunRecord {
  std::string label;
  double eta = 0.0;  // final temperature
  double tol = 0.0;
  std::size_t iterations = 0;
  double final_criterion = 0.0;
  double wall_time = 0.0;
  bool converged = false;
  std::vector<StageSummary> stages;
  std::optional<std::filesystem::path> trace_file;
  std::optional<std::filesystem::path> plan_file;
  std::optional<std::string> error;  // solver failure; other runs still execute
};

struct ExperimentResult {
  std::string problem_digest;
  std::vector<RunRecord> runs;
  std::vector<TrajectoryReport> trajectories;
};

ExperimentResult run_suite(const SuiteConfig& config);

}  // namespace bt
