#include "bt/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <map>
#include <ostream>
#include <sstream>

#include "bt/experiments.hpp"
#include "bt/io.hpp"
#include "bt/verify_oracle.hpp"

namespace bt {

std::string report_to_json(const RunReport& report) {
  nlohmann::ordered_json doc;
  doc["exit_status"] = report.exit_status;
  doc["status"] = report.status;
  doc["iterations_per_stage"] = nlohmann::json::array();
  doc["stages"] = nlohmann::json::array();
  for (const StageSummary& s : report.stages) {
    doc["iterations_per_stage"].push_back(s.iterations);
    doc["stages"].push_back({{"eta", s.eta},
                             {"tol", s.tol},
                             {"iterations", s.iterations},
                             {"final_criterion", s.final_criterion},
                             {"converged", s.converged}});
  }
  doc["final_criterion"] = report.final_criterion;
  doc["objective"] = report.objective ? nlohmann::ordered_json(*report.objective) : nullptr;
  doc["duality_gap"] = report.duality_gap ? nlohmann::ordered_json(*report.duality_gap) : nullptr;
  doc["outputs"] = nlohmann::json::array();
  for (const auto& path : report.outputs) doc["outputs"].push_back(path.string());
  return doc.dump(2) + "\n";
}

AnnealingSchedule parse_schedule(const std::string& text, double tol) {
  std::map<std::string, std::string> fields;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, "schedule entry '" + item + "' is not key=value");
    }
    fields[item.substr(0, eq)] = item.substr(eq + 1);
  }
  for (const char* key : {"stages", "factor", "final"}) {
    if (!fields.count(key)) {
      throw Error(ErrorCode::InvalidArgument,
                  std::string("schedule needs stages=<k>,factor=<f>,final=<eta>; missing ") + key);
    }
  }
  if (fields.size() != 3) throw Error(ErrorCode::InvalidArgument, "schedule has unknown keys");
  try {
    std::size_t used = 0;
    const long stages = std::stol(fields["stages"], &used);
    if (used != fields["stages"].size() || stages < 1) throw std::invalid_argument("stages");
    const double factor = std::stod(fields["factor"], &used);
    if (used != fields["factor"].size()) throw std::invalid_argument("factor");
    const double final_eta = std::stod(fields["final"], &used);
    if (used != fields["final"].size()) throw std::invalid_argument("final");
    return make_schedule(final_eta, static_cast<std::size_t>(stages), factor, tol);
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::InvalidArgument, "schedule values must be numbers: '" + text + "'");
  }
}

namespace {

std::string join(std::span<const double> v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k > 0) s += ',';
    s += format_double(v[k]);
  }
  return s;
}

struct SolveArgs {
  std::string problem;
  std::optional<double> eta;
  std::optional<std::string> schedule;
  double tol = 1e-2;
  std::size_t max_iters = kDefaultMaxIters;
  std::optional<std::string> out_plan;
  std::optional<std::string> out_trace;
  std::optional<std::string> report;
  std::optional<std::string> debug_z;
};

int cmd_solve(const SolveArgs& args, std::ostream& out, std::ostream& err) {
  RunReport report;
  OTProblem problem;
  AnnealingSchedule schedule;
  try {
    problem = to_ot_problem(read_problem_file(args.problem));
    require_valid(problem);
    if (args.schedule) {
      schedule = parse_schedule(*args.schedule, args.tol);
    } else if (args.eta) {
      validate(RegParams{*args.eta, args.tol, args.max_iters});
      schedule = single_stage(*args.eta, args.tol);
    } else {
      throw Error(ErrorCode::InvalidArgument, "one of --eta or --schedule is required");
    }
    validate(schedule);
    if (args.max_iters < 1) throw Error(ErrorCode::InvalidArgument, "--max-iters must be >= 1");
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }

  SolveResult result;
  try {
    result = solve(problem, schedule, SolveOptions{args.max_iters, 0});
  } catch (const Error& e) {
    err << "error: solver failed: " << e.what() << "\n";
    report.exit_status = kExitNotConverged;
    report.status = "failed";
    if (args.report) write_text_file(*args.report, report_to_json(report));
    return kExitNotConverged;
  }

  const bool converged = result.status == SolveStatus::Converged;
  report.exit_status = converged ? kExitOk : kExitNotConverged;
  report.status = converged ? "converged" : "max_iters_exceeded";
  report.stages = result.stages;
  report.final_criterion = result.stages.back().final_criterion;
  const ObjectiveReport objectives =
      compute_objectives(problem, result.plan.values, &result.duals);
  report.objective = objectives.total_ot_value;
  const double sign = problem.sense == Sense::Maximize ? 1.0 : -1.0;
  report.duality_gap = sign * (*objectives.dual_value - objectives.total_ot_value);

  try {
    if (args.out_plan) {
      write_matrix_csv(*args.out_plan, result.plan.values);
      report.outputs.emplace_back(*args.out_plan);
    }
    if (args.out_trace) {
      write_trace_csv(*args.out_trace, result.trace);
      report.outputs.emplace_back(*args.out_trace);
    }
    if (args.debug_z) {
      write_matrix_csv(*args.debug_z, result.final_state.z);
      report.outputs.emplace_back(*args.debug_z);
    }
    if (args.report) {
      report.outputs.emplace_back(*args.report);
      write_text_file(*args.report, report_to_json(report));
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }

  out << "status: " << report.status << "\n";
  out << "iterations: " << result.total_iterations << "\n";
  out << "final_criterion: " << format_double(report.final_criterion) << "\n";
  out << "objective: " << format_double(*report.objective) << "\n";
  if (!converged) err << "warning: iteration limit reached before the tolerance\n";
  return report.exit_status;
}

int cmd_generate(const std::string& preset, std::optional<std::size_t> size,
                 const std::string& path, std::ostream& out, std::ostream& err) {
  try {
    OTProblem problem;
    if (preset == "small-example") {
      problem = small_example();
    } else if (preset == "paper-grid") {
      if (!size) throw Error(ErrorCode::InvalidArgument, "--size is required for paper-grid");
      problem = generate_grid(GridSpec{*size});
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown preset '" + preset + "'");
    }
    write_problem_file(path, to_problem_file(problem));
    out << "wrote " << problem.n() << "x" << problem.m() << " problem to " << path << "\n";
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }
}

int cmd_verify(const std::string& problem_path, const std::string& plan_path, double tol,
               std::ostream& out, std::ostream& err) {
  KKTReport report;
  try {
    const OTProblem problem = to_ot_problem(read_problem_file(problem_path));
    const Matrix values = read_matrix_csv(plan_path);
    if (values.rows() != problem.n() || values.cols() != problem.m()) {
      throw Error(ErrorCode::DimensionMismatch,
                  "plan is " + std::to_string(values.rows()) + "x" + std::to_string(values.cols()) +
                      " but the problem is " + std::to_string(problem.n()) + "x" +
                      std::to_string(problem.m()));
    }
    VerifyOptions options;
    options.tolerance = tol;
    report = verify_balanced(problem, make_plan(values, problem.row_marginals, problem.col_marginals),
                             std::nullopt, options);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  out << "is_balanced: " << (report.is_balanced ? "true" : "false") << "\n";
  out << "max_slackness_violation: " << format_double(report.max_slackness_violation) << "\n";
  out << "max_dual_infeasibility: " << format_double(report.max_dual_infeasibility) << "\n";
  out << "row_residual: " << format_double(report.marginal_residuals.first) << "\n";
  out << "col_residual: " << format_double(report.marginal_residuals.second) << "\n";
  out << "objective: " << format_double(report.objectives.total_ot_value) << "\n";
  out << "dual_value: " << format_double(report.objectives.dual_value.value_or(0.0)) << "\n";
  out << "duality_gap: " << format_double(report.duality_gap) << "\n";
  out << "lambda: " << join(report.duals.lambda) << "\n";
  out << "mu: " << join(report.duals.mu) << "\n";
  if (report.worst_cell) {
    out << "worst_cell: (" << report.worst_cell->row + 1 << "," << report.worst_cell->col + 1 << ")\n";
  } else {
    out << "worst_cell: none\n";
  }
  return report.is_balanced ? kExitOk : kExitNotBalanced;
}

int cmd_heatmap(const std::optional<std::string>& input, const std::optional<std::string>& problem_path,
                const std::string& path, std::ostream& out, std::ostream& err) {
  try {
    Matrix matrix;
    if (input && problem_path) {
      throw Error(ErrorCode::InvalidArgument, "give either --input or --problem, not both");
    }
    if (input) {
      matrix = read_matrix_csv(*input);
    } else if (problem_path) {
      matrix = to_ot_problem(read_problem_file(*problem_path)).weights;
    } else {
      throw Error(ErrorCode::InvalidArgument, "one of --input or --problem is required");
    }
    write_pgm(path, matrix);
    out << "wrote " << matrix.cols() << "x" << matrix.rows() << " image to " << path << "\n";
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }
}

int cmd_suite(const SuiteConfig& config, std::ostream& out, std::ostream& err) {
  ExperimentResult result;
  try {
    result = run_suite(config);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  out << "grid " << config.grid_size << "x" << config.grid_size << " digest "
      << result.problem_digest << "\n";
  bool all_converged = true;
  for (const RunRecord& run : result.runs) {
    all_converged = all_converged && run.converged && !run.error;
    out << run.label << ": iterations " << run.iterations << ", criterion "
        << format_double(run.final_criterion) << ", time " << run.wall_time << " s"
        << (run.error ? ", error: " + *run.error : std::string()) << "\n";
  }
  for (const TrajectoryReport& t : result.trajectories) {
    out << "trajectory eta " << t.eta << ": iterations " << t.iterations << ", in order "
        << (t.visited_in_order ? "yes" : "no") << "\n";
    for (std::size_t k = 0; k < t.targets.size(); ++k) {
      out << "  matrix " << k + 1 << ": min distance " << format_double(t.targets[k].min_distance)
          << " at iteration " << t.targets[k].closest_iteration << "\n";
    }
  }
  return all_converged ? kExitOk : kExitNotConverged;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Balanced transport solver"};
  app.name("bt");
  app.require_subcommand(1);

  SolveArgs solve_args;
  auto* solve_cmd = app.add_subcommand("solve", "Solve a problem file with the scaling iteration");
  solve_cmd->add_option("problem,--problem", solve_args.problem, "Problem file (JSON)")->required();
  auto* eta_opt = solve_cmd->add_option("--eta", solve_args.eta, "Single-stage temperature");
  auto* sched_opt = solve_cmd->add_option("--schedule", solve_args.schedule,
                                          "Annealing: stages=<k>,factor=<f>,final=<eta>");
  eta_opt->excludes(sched_opt);
  solve_cmd->add_option("--tol", solve_args.tol, "Stopping tolerance per stage")->capture_default_str();
  solve_cmd->add_option("--max-iters", solve_args.max_iters, "Iteration limit per stage")
      ->capture_default_str();
  solve_cmd->add_option("--out-plan", solve_args.out_plan, "Plan CSV output");
  solve_cmd->add_option("--out-trace", solve_args.out_trace, "Trace CSV output");
  solve_cmd->add_option("--report", solve_args.report, "Run report JSON output");
  solve_cmd->add_option("--debug-z", solve_args.debug_z, "Dump the final z state as CSV");

  std::string preset;
  std::optional<std::size_t> size;
  std::string generate_out;
  auto* generate_cmd = app.add_subcommand("generate", "Write a built-in problem");
  generate_cmd->add_option("--preset", preset, "paper-grid | small-example")->required();
  generate_cmd->add_option("--size", size, "Grid size N (even)");
  generate_cmd->add_option("--out", generate_out, "Output problem file")->required();

  std::string verify_problem;
  std::string verify_plan;
  double verify_tol = VerifyOptions{}.tolerance;
  auto* verify_cmd = app.add_subcommand("verify", "Check a plan for the balanced-solution conditions");
  verify_cmd->add_option("--problem", verify_problem, "Problem file (JSON)")->required();
  verify_cmd->add_option("--plan", verify_plan, "Plan CSV")->required();
  verify_cmd->add_option("--tol", verify_tol, "Violation tolerance")->capture_default_str();

  std::optional<std::string> heat_input;
  std::optional<std::string> heat_problem;
  std::string heat_out;
  auto* heatmap_cmd = app.add_subcommand("heatmap", "Render a matrix as a PGM image");
  heatmap_cmd->add_option("--input", heat_input, "Matrix CSV (plan or weights)");
  heatmap_cmd->add_option("--problem", heat_problem, "Problem file; renders its weights");
  heatmap_cmd->add_option("--out", heat_out, "Output .pgm")->required();

  SuiteConfig suite;
  std::optional<std::string> suite_dir;
  bool no_anneal = false;
  auto* suite_cmd = app.add_subcommand("suite", "Run the grid, annealing and trajectory experiments");
  suite_cmd->add_option("--size", suite.grid_size, "Grid size N (even)")->capture_default_str();
  suite_cmd->add_option("--etas", suite.single_stage_etas, "Single-stage temperatures")
      ->delimiter(',');
  suite_cmd->add_option("--tol", suite.tol, "Stopping tolerance")->capture_default_str();
  suite_cmd->add_option("--max-iters", suite.max_iters, "Iteration limit per stage")
      ->capture_default_str();
  suite_cmd->add_option("--anneal-final", suite.anneal_final_eta, "Final annealing temperature")
      ->capture_default_str();
  suite_cmd->add_option("--anneal-stages", suite.anneal_stages)->capture_default_str();
  suite_cmd->add_option("--anneal-factor", suite.anneal_factor)->capture_default_str();
  suite_cmd->add_flag("--no-anneal", no_anneal, "Skip the annealed run");
  suite_cmd->add_option("--trajectory-etas", suite.trajectory_etas)->delimiter(',');
  suite_cmd->add_option("--out-dir", suite_dir, "Directory for traces and plans");

  std::vector<std::string> argv_storage{"bt"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }

  if (solve_cmd->parsed()) return cmd_solve(solve_args, out, err);
  if (generate_cmd->parsed()) return cmd_generate(preset, size, generate_out, out, err);
  if (verify_cmd->parsed()) return cmd_verify(verify_problem, verify_plan, verify_tol, out, err);
  if (heatmap_cmd->parsed()) return cmd_heatmap(heat_input, heat_problem, heat_out, out, err);
  suite.run_annealed = !no_anneal;
  if (suite_dir) suite.output_dir = *suite_dir;
  return cmd_suite(suite, out, err);
}

}  // namespace bt
