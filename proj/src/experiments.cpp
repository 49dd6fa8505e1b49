#include "bt/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <numbers>

#include "bt/io.hpp"

namespace bt {

double paper_sine_weight(double x, double y) {
  const double dx = x - 0.5;
  const double dy = y - 0.5;
  return std::sin(4.0 * std::numbers::pi * (dx * dx + dy * dy));
}

namespace {

Vector centered_marginal(std::size_t n) {
  Vector v(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    v[i] = std::abs(x - 0.5);
    total += v[i];
  }
  for (double& x : v) x /= total;
  return v;
}

}  // namespace

OTProblem generate_grid(const GridSpec& spec) {
  if (spec.size < 2) throw Error(ErrorCode::InvalidArgument, "grid size must be at least 2");
  if (spec.weight_function != "paper-sine") {
    throw Error(ErrorCode::InvalidArgument, "unknown weight function '" + spec.weight_function + "'");
  }
  if (spec.marginal_function != "abs-centered") {
    throw Error(ErrorCode::InvalidArgument,
                "unknown marginal function '" + spec.marginal_function + "'");
  }
  if (spec.size % 2 == 1) {
    throw Error(ErrorCode::ZeroMarginal, "odd grid size " + std::to_string(spec.size) +
                                             " puts a cell centre at 1/2, where the marginal vanishes");
  }
  const std::size_t n = spec.size;
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double y = (static_cast<double>(j) + 0.5) / static_cast<double>(n);
      a(i, j) = paper_sine_weight(x, y);
    }
  }
  const Vector marginal = centered_marginal(n);
  return OTProblem{std::move(a), marginal, marginal, Sense::Maximize};
}

OTProblem small_example() {
  return OTProblem{Matrix{{0.0, 1.0, 0.5}, {0.7, 0.5, 0.3}, {0.6, 0.3, 0.0}},
                   {0.25, 0.25, 0.5},
                   {0.2, 0.6, 0.2},
                   Sense::Maximize};
}

Matrix small_example_solution() {
  return Matrix{{0.0, 0.25, 0.0}, {0.0, 0.05, 0.2}, {0.2, 0.3, 0.0}};
}

std::vector<Matrix> stagnation_matrices() {
  return {
      Matrix{{0.0, 0.1875, 0.0625}, {0.25, 0.0, 0.0}, {0.5, 0.0, 0.0}},
      Matrix{{0.0, 0.25, 0.0}, {0.0, 0.0, 0.25}, {0.5, 0.0, 0.0}},
      Matrix{{0.0, 0.25, 0.0}, {0.0, 0.0, 0.25}, {0.1875, 0.3125, 0.0}},
  };
}

std::string problem_digest(const OTProblem& problem) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  auto feed = [&](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < bytes; ++k) {
      hash ^= p[k];
      hash *= 0x100000001b3ULL;
    }
  };
  const std::uint64_t dims[3] = {problem.n(), problem.m(),
                                 problem.sense == Sense::Maximize ? 0u : 1u};
  feed(dims, sizeof dims);
  feed(problem.weights.data().data(), problem.weights.size() * sizeof(double));
  feed(problem.row_marginals.data(), problem.row_marginals.size() * sizeof(double));
  feed(problem.col_marginals.data(), problem.col_marginals.size() * sizeof(double));
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(hash));
  return buffer;
}

TrajectoryReport analyze_trajectory(const std::vector<PlanSnapshot>& snapshots,
                                    const std::vector<Matrix>& targets, double threshold) {
  TrajectoryReport report;
  report.threshold = threshold;
  report.targets.resize(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    TargetVisit& visit = report.targets[t];
    visit.min_distance = std::numeric_limits<double>::infinity();
    for (const PlanSnapshot& snap : snapshots) {
      const double d = max_abs_diff(snap.plan, targets[t]);
      if (d < visit.min_distance) {
        visit.min_distance = d;
        visit.closest_iteration = snap.iteration;
      }
    }
  }
  std::size_t cursor = 0;
  bool in_order = true;
  for (std::size_t t = 0; t < targets.size() && in_order; ++t) {
    in_order = false;
    for (; cursor < snapshots.size(); ++cursor) {
      if (max_abs_diff(snapshots[cursor].plan, targets[t]) <= threshold) {
        report.targets[t].ordered_visit = snapshots[cursor].iteration;
        in_order = true;
        ++cursor;
        break;
      }
    }
  }
  report.visited_in_order = in_order;
  return report;
}

std::size_t trajectory_stride(const OTProblem& problem) {
  return problem.n() * problem.m() <= 100 ? 1 : 10;
}

TrajectoryReport trajectory_study(const OTProblem& problem, double eta, double tol,
                                  std::size_t max_iters, const std::vector<Matrix>& targets,
                                  double threshold) {
  const SolveResult run = solve(problem, single_stage(eta, tol),
                                SolveOptions{max_iters, trajectory_stride(problem)});
  TrajectoryReport report = analyze_trajectory(run.trace.snapshots, targets, threshold);
  report.eta = eta;
  report.iterations = run.total_iterations;
  report.converged = run.status == SolveStatus::Converged;
  return report;
}

void validate(const SuiteConfig& config) {
  if (config.grid_size < 2 || config.grid_size % 2 == 1) {
    throw Error(ErrorCode::InvalidArgument, "suite grid size must be even and at least 2");
  }
  for (double eta : config.single_stage_etas) validate(RegParams{eta, config.tol, config.max_iters});
  for (double eta : config.trajectory_etas) validate(RegParams{eta, config.tol, config.max_iters});
  if (!(config.trajectory_threshold > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "trajectory threshold must be positive");
  }
  if (config.run_annealed) {
    validate(make_schedule(config.anneal_final_eta, config.anneal_stages, config.anneal_factor,
                           config.tol));
  }
}

namespace {

RunRecord execute(const OTProblem& problem, const std::string& label,
                  const AnnealingSchedule& schedule, const SuiteConfig& config) {
  RunRecord record;
  record.label = label;
  record.eta = schedule.stages.back().eta;
  record.tol = schedule.stages.back().tol;
  const auto start = std::chrono::steady_clock::now();
  try {
    const SolveResult run = solve(problem, schedule, SolveOptions{config.max_iters, 0});
    record.iterations = run.total_iterations;
    record.stages = run.stages;
    record.final_criterion = run.stages.back().final_criterion;
    record.converged = run.status == SolveStatus::Converged;
    if (config.output_dir) {
      record.trace_file = *config.output_dir / (label + "_trace.csv");
      record.plan_file = *config.output_dir / (label + "_plan.csv");
      write_trace_csv(*record.trace_file, run.trace);
      write_matrix_csv(*record.plan_file, run.plan.values);
    }
  } catch (const Error& e) {
    record.error = e.what();
  }
  record.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

std::string eta_label(double eta) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%g", eta);
  return buffer;
}

}  // namespace

ExperimentResult run_suite(const SuiteConfig& config) {
  validate(config);
  if (config.output_dir) std::filesystem::create_directories(*config.output_dir);
  const OTProblem grid = generate_grid(GridSpec{config.grid_size});
  ExperimentResult result;
  result.problem_digest = problem_digest(grid);
  for (double eta : config.single_stage_etas) {
    result.runs.push_back(
        execute(grid, "single_eta" + eta_label(eta), single_stage(eta, config.tol), config));
  }
  if (config.run_annealed) {
    result.runs.push_back(execute(grid, "annealed_eta" + eta_label(config.anneal_final_eta),
                                  make_schedule(config.anneal_final_eta, config.anneal_stages,
                                                config.anneal_factor, config.tol),
                                  config));
  }
  const OTProblem example = small_example();
  for (double eta : config.trajectory_etas) {
    try {
      result.trajectories.push_back(trajectory_study(example, eta, config.tol, config.max_iters,
                                                     stagnation_matrices(),
                                                     config.trajectory_threshold));
    } catch (const Error&) {
      TrajectoryReport failed;
      failed.eta = eta;
      failed.threshold = config.trajectory_threshold;
      result.trajectories.push_back(failed);
    }
  }
  return result;
}

}  // namespace bt
