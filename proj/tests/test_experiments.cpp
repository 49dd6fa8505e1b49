#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "bt/classic_iter.hpp"
#include "bt/experiments.hpp"
#include "bt/io.hpp"
#include "bt/verify_oracle.hpp"

using namespace bt;

TEST_SUITE("experiments") {

TEST_CASE("sine weight zeros") {
  CHECK(paper_sine_weight(0.5, 0.5) == 0.0);
  CHECK(std::abs(paper_sine_weight(1.0, 1.0)) <= 1e-15);
}

TEST_CASE("2x2 grid") {
  const OTProblem g = generate_grid(GridSpec{2});
  for (double v : g.weights.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g.row_marginals == Vector{0.5, 0.5});
  CHECK(g.col_marginals == Vector{0.5, 0.5});
  CHECK(g.sense == Sense::Maximize);
}

TEST_CASE("even grids are valid with unit mass") {
  for (std::size_t n : {4u, 10u, 64u}) {
    const OTProblem g = generate_grid(GridSpec{n});
    CHECK(validate_problem(g).ok());
    double sr = 0.0;
    for (double v : g.row_marginals) {
      CHECK(v > 0.0);
      sr += v;
    }
    CHECK(sr == doctest::Approx(1.0).epsilon(1e-14));
    // Cell-centre sampling.
    const double x = 2.5 / static_cast<double>(n);
    CHECK(g.weights(2, 0) == paper_sine_weight(x, 0.5 / static_cast<double>(n)));
  }
}

TEST_CASE("grid rejects bad specs") {
  CHECK_THROWS_WITH_AS(generate_grid(GridSpec{3}), doctest::Contains("ZeroMarginal"), Error);
  CHECK_THROWS_AS(generate_grid(GridSpec{1}), Error);
  CHECK_THROWS_AS(generate_grid(GridSpec{4, "other"}), Error);
  CHECK_THROWS_AS(generate_grid(GridSpec{4, "paper-sine", "uniform"}), Error);
}

TEST_CASE("3x3 example data") {
  const OTProblem e = small_example();
  CHECK(e.weights == Matrix{{0.0, 1.0, 0.5}, {0.7, 0.5, 0.3}, {0.6, 0.3, 0.0}});
  CHECK(e.row_marginals == Vector{0.25, 0.25, 0.5});
  CHECK(e.col_marginals == Vector{0.2, 0.6, 0.2});
  CHECK(validate_problem(e).ok());
  const OracleResult o = lp_oracle(e);
  CHECK(o.objective == doctest::Approx(0.545).epsilon(1e-12));
  CHECK(max_abs_diff(o.plan.values, small_example_solution()) <= 1e-9);
}

TEST_CASE("stagnation matrices are row-balanced") {
  const OTProblem e = small_example();
  for (const Matrix& m : stagnation_matrices()) {
    const Vector rs = row_sums(m);
    for (std::size_t i = 0; i < 3; ++i) CHECK(rs[i] == doctest::Approx(e.row_marginals[i]).epsilon(1e-15));
  }
}

TEST_CASE("digest is stable and data-sensitive") {
  const OTProblem e = small_example();
  CHECK(problem_digest(e) == problem_digest(small_example()));
  CHECK(problem_digest(e).size() == 16);
  OTProblem f = e;
  f.weights(2, 2) = 1e-300;
  CHECK(problem_digest(f) != problem_digest(e));
  f = e;
  f.sense = Sense::Minimize;
  CHECK(problem_digest(f) != problem_digest(e));
}

TEST_CASE("trajectory analysis") {
  const std::vector<Matrix> targets{Matrix{{1.0}}, Matrix{{2.0}}};
  const std::vector<PlanSnapshot> snaps{{0, Matrix{{0.0}}}, {1, Matrix{{1.01}}}, {2, Matrix{{1.5}}},
                                        {3, Matrix{{1.98}}}, {4, Matrix{{1.0}}}};
  const TrajectoryReport r = analyze_trajectory(snaps, targets, 0.05);
  CHECK(r.visited_in_order);
  CHECK(*r.targets[0].ordered_visit == 1);
  CHECK(*r.targets[1].ordered_visit == 3);
  CHECK(r.targets[0].min_distance == 0.0);
  CHECK(r.targets[0].closest_iteration == 4);

  // Reversed order is not a visit in order.
  const TrajectoryReport rev = analyze_trajectory(snaps, {Matrix{{2.0}}, Matrix{{1.01}}}, 0.001);
  CHECK_FALSE(rev.visited_in_order);
}

TEST_CASE("trajectory reports are monotone in the threshold") {
  const OTProblem e = small_example();
  const SolveResult r = solve(e, single_stage(1e-3), SolveOptions{kDefaultMaxIters, 1});
  std::size_t previous = stagnation_matrices().size() + 1;
  for (double threshold : {1.0, 0.3, 0.1, 0.05, 0.01, 1e-4, 1e-16}) {
    const TrajectoryReport t = analyze_trajectory(r.trace.snapshots, stagnation_matrices(), threshold);
    std::size_t visited = 0;
    for (const TargetVisit& v : t.targets) visited += v.min_distance <= threshold ? 1 : 0;
    CHECK(visited <= previous);
    previous = visited;
  }
}

TEST_CASE("stagnation path on the 3x3 example") {
  const OTProblem e = small_example();
  bool passed = false;
  for (double eta : {1e-3, 1e-4}) {
    const TrajectoryReport t = trajectory_study(e, eta, 1e-2, kDefaultMaxIters, stagnation_matrices(), 0.05);
    CHECK(t.converged);
    passed = passed || t.visited_in_order;
  }
  CHECK(passed);
  CHECK(trajectory_stride(e) == 1);
  CHECK(trajectory_stride(generate_grid(GridSpec{12})) == 10);
}

TEST_CASE("suite on a small grid writes its outputs") {
  const auto dir = std::filesystem::temp_directory_path() / "bt_suite_test";
  std::filesystem::remove_all(dir);
  SuiteConfig config;
  config.grid_size = 8;
  config.single_stage_etas = {1e-2, 1e-3};
  config.anneal_final_eta = 1e-3;
  config.anneal_stages = 4;
  config.trajectory_etas = {1e-3};
  config.output_dir = dir;
  const ExperimentResult result = run_suite(config);
  CHECK(result.problem_digest == problem_digest(generate_grid(GridSpec{8})));
  REQUIRE(result.runs.size() == 3);
  for (const RunRecord& run : result.runs) {
    CHECK_FALSE(run.error.has_value());
    CHECK(run.converged);
    CHECK(run.final_criterion < run.tol);
    CHECK(run.iterations <= config.max_iters * run.stages.size());
    REQUIRE(run.trace_file.has_value());
    CHECK(std::filesystem::exists(*run.trace_file));
    CHECK(std::filesystem::exists(*run.plan_file));
  }
  CHECK(result.runs[2].stages.size() == 4);
  REQUIRE(result.trajectories.size() == 1);
  CHECK(result.trajectories[0].visited_in_order);

  // Identical configuration, identical traces.
  const ExperimentResult again = run_suite(config);
  for (std::size_t k = 0; k < again.runs.size(); ++k) {
    CHECK(read_text_file(*again.runs[k].trace_file) == read_text_file(*result.runs[k].trace_file));
  }
  std::filesystem::remove_all(dir);

  SuiteConfig bad;
  bad.grid_size = 7;
  CHECK_THROWS_AS(run_suite(bad), Error);
}

TEST_CASE("suite keeps partial results when a run fails") {
  SuiteConfig config;
  config.grid_size = 8;
  config.single_stage_etas = {1e-4};
  config.max_iters = 3;
  config.run_annealed = false;
  config.trajectory_etas = {};
  const ExperimentResult result = run_suite(config);
  REQUIRE(result.runs.size() == 1);
  CHECK_FALSE(result.runs[0].converged);
  CHECK(result.runs[0].iterations <= 3);
}

}  // TEST_SUITE
