// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "bt/classic_iter.hpp"
#include "bt/experiments.hpp"
#include "bt/reg_solver.hpp"
#include "bt/verify_oracle.hpp"
#include "test_support.hpp"

using namespace bt;
using bt::testing::exp_matrix;
using bt::testing::random_problem;
using bt::testing::rel_err;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buffer[256];
  std::snprintf(buffer, sizeof buffer, format, a, b, c);
  return buffer;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Matrix ipfp_reference_step(Matrix x, const Vector& r, const Vector& c) {
  const Vector cs = col_sums(x);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) *= c[j] / cs[j];
  }
  const Vector rs = row_sums(x);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) *= r[i] / rs[i];
  }
  return x;
}

Outcome small_example_exactness() {
  const auto start = std::chrono::steady_clock::now();
  const SolveResult r = solve(small_example(), make_schedule(1e-4, 12, 1.5, 0.01));
  const double elapsed = seconds_since(start);
  const double dist = max_abs_diff(r.plan.values, small_example_solution());
  const double objective = compute_objectives(small_example(), r.plan.values).total_ot_value;
  return {r.status == SolveStatus::Converged && dist <= 0.01 && objective >= 0.545 - 0.005 && elapsed < 5.0,
          fmt("max entry error %.3g, objective %.6f, %.3f s", dist, objective, elapsed)};
}

Outcome oracle_ground_truth() {
  const OracleResult o = lp_oracle(small_example());
  const double dist = max_abs_diff(o.plan.values, small_example_solution());
  const KKTReport k = verify_balanced(small_example(), o.plan);
  const bool pass = o.unique_optimum && dist <= 1e-9 && std::abs(o.objective - 0.545) <= 1e-9 &&
                    k.is_balanced && std::abs(k.duality_gap) <= 1e-9;
  return {pass, fmt("plan error %.3g, objective %.15f, duality gap %.3g", dist, o.objective, k.duality_gap)};
}

Outcome formulation_equivalence() {
  std::mt19937_64 rng(1001);
  double worst_z = 0.0;
  double worst_vec = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const OTProblem p = random_problem(rng, 5, 7);
    const Matrix b = exp_matrix(p.weights);
    for (double eta : {0.5, 0.1}) {
      ZState state{b, eta, 0};
      Matrix x = b;
      for (double& v : x.data()) v = std::pow(v, 1.0 / eta);
      for (int k = 0; k < 25; ++k) {
        state = z_step(state, p.row_marginals, p.col_marginals).state;
        x = ipfp_reference_step(x, p.row_marginals, p.col_marginals);
        worst_z = std::max(worst_z, max_rel_diff(extract_plan(state), x));
      }
    }
    const Matrix x0 = bt::testing::random_matrix(rng, 5, 7, 0.1, 2.0);
    const auto vec = ipfp_vector(x0, Vector(5, 1.0), p.row_marginals, p.col_marginals, 20);
    IpfpOptions opts;
    opts.tol = 0.0;
    const IpfpReport mat = ipfp_matrix(x0, p.row_marginals, p.col_marginals, 20, opts);
    for (std::size_t k = 0; k < mat.iterates.size(); ++k) worst_vec = std::max(worst_vec, max_rel_diff(vec[k].x, mat.iterates[k]));
  }
  return {worst_z <= 1e-8 && worst_vec <= 1e-14,
          fmt("z vs IPFP worst relative %.3g; vector vs matrix IPFP %.3g", worst_z, worst_vec)};
}

Outcome criterion_identity() {
  const OTProblem e = small_example();
  const double eta = 0.05;
  ZState state{row_equilibrate(exp_matrix(e.weights)).scaled, eta, 0};
  double worst = 0.0;
  int steps = 0;
  for (; steps < 500; ++steps) {
    const Vector s = column_multipliers(state, e.col_marginals);
    worst = std::max(worst, std::abs(criterion(s, eta) -
                                     hilbert_distance(col_sums(extract_plan(state)), e.col_marginals)));
    state = z_step(state, e.row_marginals, e.col_marginals).state;
  }
  return {worst <= 1e-9, fmt("worst |criterion - Hilbert distance| %.3g over %.0f iterations", worst, steps)};
}

Outcome fixed_point_eigenvalue() {
  std::mt19937_64 rng(1003);
  double worst = 0.0;
  std::vector<OTProblem> problems{small_example()};
  for (int k = 0; k < 9; ++k) problems.push_back(random_problem(rng, 4, 6));
  bool converged = true;
  for (const OTProblem& p : problems) {
    for (double eta : {0.5, 0.1}) {
      const SolveResult r = solve(p, single_stage(eta, 1e-10));
      converged = converged && r.status == SolveStatus::Converged;
      const PhiStep step = phi_eta_step(r.scalings.alpha, ot_to_moma(p), eta);
      const FixedPointReport fp = fixed_point_report(r.scalings.alpha, step.alpha_next, 1e-6);
      for (double ratio : fp.component_ratios) worst = std::max(worst, std::abs(ratio - 1.0));
    }
  }
  return {converged && worst <= 1e-6, fmt("max |alpha^/alpha - 1| = %.3g", worst)};
}

Outcome map_properties() {
  std::mt19937_64 rng(1005);
  double worst_homog = 0.0;
  int monotone_ok = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    const MOMAProblem p = ot_to_moma(random_problem(rng, 4, 5, std::log(0.5), std::log(2.0)));
    const double eta = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
    const Vector alpha = bt::testing::random_positive(rng, 4, 0.5, 2.0);
    const double scale = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
    Vector scaled = alpha;
    for (double& v : scaled) v *= scale;
    const PhiStep base = phi_eta_step(alpha, p, eta);
    const PhiStep hom = phi_eta_step(scaled, p, eta);
    for (std::size_t i = 0; i < 4; ++i) {
      worst_homog = std::max(worst_homog, rel_err(hom.alpha_next[i], scale * base.alpha_next[i]));
    }
    Vector raised = alpha;
    raised[static_cast<std::size_t>(trial) % 4] *= 1.0 + std::uniform_real_distribution<double>(0.01, 0.5)(rng);
    const PhiStep up = phi_eta_step(raised, p, eta);
    bool strict = true;
    for (std::size_t i = 0; i < 4; ++i) strict = strict && up.alpha_next[i] > base.alpha_next[i];
    monotone_ok += strict ? 1 : 0;
  }
  return {worst_homog <= 1e-12 && monotone_ok == trials,
          fmt("homogeneity worst relative %.3g; strict monotonicity %.0f/%.0f trials", worst_homog, monotone_ok,
              trials)};
}

Outcome degenerate_map() {
  std::mt19937_64 rng(1007);
  // Exact idempotence on power-of-two data, where the update is exact in
  // binary arithmetic; general data agree to the rounding of one product and
  // one quotient.
  std::uniform_int_distribution<int> exponent(-6, 6);
  int exact = 0;
  double worst_general = 0.0;
  bool attains = true;
  for (int trial = 0; trial < 100; ++trial) {
    Matrix b(5, 6);
    for (double& v : b.data()) v = std::ldexp(1.0, exponent(rng));
    Vector alpha(5);
    for (double& v : alpha) v = std::ldexp(1.0, exponent(rng));
    const NonRegStep once = nonreg_step(alpha, b);
    const NonRegStep twice = nonreg_step(once.alpha_next, b);
    exact += (twice.alpha_next == once.alpha_next && twice.beta == once.beta) ? 1 : 0;

    const Matrix g = bt::testing::random_matrix(rng, 5, 6, 0.1, 10.0);
    const Vector ga = bt::testing::random_positive(rng, 5, 0.1, 10.0);
    const NonRegStep g1 = nonreg_step(ga, g);
    const NonRegStep g2 = nonreg_step(g1.alpha_next, g);
    worst_general = std::max(worst_general, max_rel_diff(g1.alpha_next, g2.alpha_next));
    for (std::size_t i = 0; i < 5; ++i) {
      bool row = false;
      for (std::size_t j = 0; j < 6; ++j) row = row || rel_err(g1.alpha_next[i] * g(i, j), g1.beta[j]) <= 4.5e-16;
      attains = attains && row;
    }
  }
  const Matrix b = exp_matrix(small_example().weights);
  const Vector first = nonreg_step(Vector{1.0, 1.0, 1.0}, b).alpha_next;
  const Vector second{1.0, std::exp(0.1), std::exp(0.2)};
  const double fp1 = max_rel_diff(nonreg_step(first, b).alpha_next, first);
  const double fp2 = max_rel_diff(nonreg_step(second, b).alpha_next, second);
  const double separation = hilbert_distance(first, second);
  const bool pass = exact == 100 && worst_general <= 4.5e-16 && attains && fp1 <= 4.5e-16 && fp2 <= 4.5e-16 &&
                    separation > 0.05;
  return {pass, fmt("exactly idempotent %.0f/100 (dyadic); general data within %.2g relative; fixed points "
                    "%.2g apart in Hilbert metric",
                    exact, worst_general, separation)};
}

Outcome monge_greedy() {
  std::mt19937_64 rng(1009);
  double worst = 0.0;
  int supermodular = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Vector u = bt::testing::random_positive(rng, 8, 0.0, 50.0);
    Vector v = bt::testing::random_positive(rng, 8, 0.0, 50.0);
    for (double& x : u) x = std::floor(x);
    for (double& x : v) x = std::floor(x);
    std::sort(u.begin(), u.end());
    std::sort(v.begin(), v.end());
    OTProblem p{Matrix(8, 8), bt::testing::normalized(bt::testing::random_positive(rng, 8, 0.5, 1.5)),
                bt::testing::normalized(bt::testing::random_positive(rng, 8, 0.5, 1.5))};
    for (std::size_t i = 0; i < 8; ++i) {
      for (std::size_t j = 0; j < 8; ++j) p.weights(i, j) = u[i] * v[j];
    }
    supermodular += monge_check(p).holds ? 1 : 0;
    const double greedy = compute_objectives(p, greedy_northwest(p).values).total_ot_value;
    const double oracle = lp_oracle(p).objective;
    worst = std::max(worst, std::abs(greedy - oracle) / std::max(1.0, std::abs(oracle)));
  }
  const double small_greedy = compute_objectives(small_example(), greedy_northwest(small_example()).values).total_ot_value;
  const bool pass = supermodular == 50 && worst <= 1e-9 && std::abs(small_greedy - 0.265) <= 1e-12 &&
                    !monge_check(small_example()).holds;
  return {pass, fmt("greedy vs oracle worst %.3g over 50 Monge instances; 3x3 greedy %.6f < 0.545", worst,
                    small_greedy)};
}

Outcome shift_invariance() {
  std::mt19937_64 rng(1011);
  int checked = 0;
  double worst = 0.0;
  while (checked < 20) {
    const std::size_t n = 3 + static_cast<std::size_t>(checked % 3);
    const std::size_t m = 3 + static_cast<std::size_t>(checked % 2);
    OTProblem p = random_problem(rng, n, m);
    const OracleResult before = lp_oracle(p);
    if (!before.unique_optimum) continue;
    const Vector rows = bt::testing::random_positive(rng, n, -5.0, 5.0);
    const Vector cols = bt::testing::random_positive(rng, m, -5.0, 5.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) p.weights(i, j) += rows[i] + cols[j];
    }
    worst = std::max(worst, max_abs_diff(lp_oracle(p).plan.values, before.plan.values));
    ++checked;
  }
  return {worst <= 1e-9, fmt("worst plan change %.3g over 20 unique-optimum instances", worst)};
}

struct GridRuns {
  std::size_t iters_1e2 = 0;
  std::size_t iters_1e3 = 0;
  std::size_t single_1e4 = 0;
  std::size_t annealed_1e4 = 0;
  bool converged = true;
};

const GridRuns& grid_runs() {
  static const GridRuns runs = [] {
    GridRuns g;
    const OTProblem grid = generate_grid(GridSpec{64});
    const SolveOptions opts{1000000, 0};
    auto run = [&](const AnnealingSchedule& s) {
      const SolveResult r = solve(grid, s, opts);
      g.converged = g.converged && r.status == SolveStatus::Converged;
      return r.total_iterations;
    };
    g.iters_1e2 = run(single_stage(1e-2, 0.01));
    g.iters_1e3 = run(single_stage(1e-3, 0.01));
    g.single_1e4 = run(single_stage(1e-4, 0.01));
    g.annealed_1e4 = run(make_schedule(1e-4, 12, 1.5, 0.01));
    return g;
  }();
  return runs;
}

Outcome iteration_scaling() {
  const GridRuns& g = grid_runs();
  const double ratio = static_cast<double>(g.iters_1e3) / static_cast<double>(g.iters_1e2);
  return {g.converged && ratio >= 5.0 && ratio <= 20.0,
          fmt("64x64 grid: %.0f iterations at eta=1e-2, %.0f at eta=1e-3, ratio %.2f", static_cast<double>(g.iters_1e2),
              static_cast<double>(g.iters_1e3), ratio)};
}

Outcome annealing_speedup() {
  const GridRuns& g = grid_runs();
  const double speedup = static_cast<double>(g.single_1e4) / static_cast<double>(g.annealed_1e4);
  return {g.converged && speedup >= 5.0,
          fmt("64x64 grid at eta=1e-4: single stage %.0f iterations, annealed %.0f, speedup %.1fx",
              static_cast<double>(g.single_1e4), static_cast<double>(g.annealed_1e4), speedup)};
}

Outcome stagnation_path() {
  const OTProblem e = small_example();
  std::string detail;
  bool path = false;
  for (double eta : {1e-3, 1e-4}) {
    const TrajectoryReport t = trajectory_study(e, eta, 0.01, kDefaultMaxIters, stagnation_matrices(), 0.05);
    path = path || t.visited_in_order;
    detail += fmt("eta=%.0e in order: ", eta) + (t.visited_in_order ? "yes" : "no") + " (min distances";
    for (const TargetVisit& v : t.targets) detail += fmt(" %.1e", v.min_distance);
    detail += "); ";
  }
  int cycling = 0;
  for (const Matrix& start : stagnation_matrices()) {
    const IpfpReport rep = ipfp_matrix(start, e.row_marginals, e.col_marginals, 10000, IpfpOptions{.record_iterates = false});
    cycling += rep.outcome == IpfpOutcome::Cycling ? 1 : 0;
  }
  detail += fmt("IPFP cycling from %.0f/3 matrices", cycling);
  return {path && cycling == 3, detail};
}

Outcome marginal_conservation() {
  std::mt19937_64 rng(1013);
  double worst_rows = 0.0;
  bool terminal = true;
  for (double eta : {0.5, 0.1, 0.01}) {
    for (int trial = 0; trial < 5; ++trial) {
      const OTProblem p = trial == 0 ? small_example() : random_problem(rng, 5, 6);
      ZState state{row_equilibrate(exp_matrix(p.weights)).scaled, eta, 0};
      for (int k = 0; k < 100; ++k) {
        state = z_step(state, p.row_marginals, p.col_marginals).state;
        const Vector rs = row_sums(extract_plan(state));
        for (std::size_t i = 0; i < rs.size(); ++i) worst_rows = std::max(worst_rows, rel_err(rs[i], p.row_marginals[i]));
      }
      const SolveResult r = solve(p, single_stage(eta, 0.01));
      const double d = hilbert_distance(col_sums(r.plan.values), p.col_marginals);
      terminal = terminal && r.status == SolveStatus::Converged && d <= 0.01;
    }
  }
  return {worst_rows <= 1e-12 && terminal,
          fmt("worst relative row-sum error %.3g; terminal column distance <= tol: ", worst_rows) +
              (terminal ? "yes" : "no")};
}

Outcome risk_aversion() {
  double worst = 0.0;
  for (double eta : {0.3, 0.05}) {
    for (double x : {0.5, 1.0, 2.0}) {
      auto coefficient = [&](double h) {
        const double gp = isoelastic_utility(x + h, eta);
        const double g0 = isoelastic_utility(x, eta);
        const double gm = isoelastic_utility(x - h, eta);
        return -((gp - 2.0 * g0 + gm) / (h * h)) / ((gp - gm) / (2.0 * h));
      };
      const double h = 1e-3;
      const double estimate = (4.0 * coefficient(h / 2.0) - coefficient(h)) / 3.0;
      worst = std::max(worst, rel_err(estimate, eta / x));
    }
  }
  return {worst <= 1e-6, fmt("worst relative error vs eta/x %.3g", worst)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"small-example exactness", small_example_exactness},
      {"oracle ground truth", oracle_ground_truth},
      {"formulation equivalence", formulation_equivalence},
      {"criterion identity", criterion_identity},
      {"fixed point eigenvalue", fixed_point_eigenvalue},
      {"update map homogeneity and monotonicity", map_properties},
      {"degenerate map behaviour", degenerate_map},
      {"Monge greedy optimality", monge_greedy},
      {"shift invariance", shift_invariance},
      {"iteration scaling", iteration_scaling},
      {"annealing speedup", annealing_speedup},
      {"stagnation path", stagnation_path},
      {"marginal conservation", marginal_conservation},
      {"risk aversion relation", risk_aversion},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome out;
    try {
      out = criteria[k].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    failures += out.pass ? 0 : 1;
    std::printf("[%s] %zu %s: %s\n", out.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                out.detail.c_str());
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
