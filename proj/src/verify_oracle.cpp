#include "bt/verify_oracle.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <numeric>
#include <queue>

namespace bt {

double hilbert_distance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) {
    throw Error(ErrorCode::LengthMismatch, "Hilbert distance needs two non-empty vectors of equal length");
  }
  double hi = -std::numeric_limits<double>::infinity();
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0) || !std::isfinite(x[k]) || !std::isfinite(y[k])) {
      throw Error(ErrorCode::NonPositiveEntry, "Hilbert distance needs strictly positive entries");
    }
    const double q = x[k] / y[k];
    hi = std::max(hi, q);
    lo = std::min(lo, q);
  }
  return std::log(hi / lo);
}

namespace {

std::string cell_name(std::size_t i, std::size_t j) {
  return "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
}

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t count) : parent(count) {
    std::iota(parent.begin(), parent.end(), std::size_t{0});
  }
  std::size_t find(std::size_t v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

// Forest potentials for weights `a` (maximization convention). Rows are graph
// nodes 0..n-1, columns n..n+m-1.
struct ForestDuals {
  DualPotentials duals;
  std::vector<std::size_t> component;  // per node, representative
  std::vector<char> support;  // row-major
  std::vector<char> in_forest;  // row-major
};

ForestDuals forest_duals(const Matrix& a, const Matrix& x, double support_threshold) {
  const std::size_t n = a.rows();
  const std::size_t m = a.cols();
  const double top = max_entry(x);
  if (!(top > 0.0)) throw Error(ErrorCode::InvalidArgument, "plan has no positive entry");
  const double cut = support_threshold * top;

  ForestDuals out;
  out.support.assign(n * m, 0);
  out.in_forest.assign(n * m, 0);
  std::vector<std::size_t> cells;
  for (std::size_t k = 0; k < n * m; ++k) {
    if (x.data()[k] > cut) {
      out.support[k] = 1;
      cells.push_back(k);
    }
  }
  std::stable_sort(cells.begin(), cells.end(), [&](std::size_t p, std::size_t q) {
    return x.data()[p] > x.data()[q];
  });

  DisjointSets sets(n + m);
  std::vector<std::vector<std::size_t>> adjacency(n + m);
  for (std::size_t k : cells) {
    const std::size_t i = k / m;
    const std::size_t j = k % m;
    if (sets.unite(i, n + j)) {
      out.in_forest[k] = 1;
      adjacency[i].push_back(n + j);
      adjacency[n + j].push_back(i);
    }
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  Vector potential(n + m, nan);
  std::vector<char> seen(n + m, 0);
  for (std::size_t root = 0; root < n; ++root) {
    if (seen[root]) continue;
    seen[root] = 1;
    potential[root] = 0.0;
    std::queue<std::size_t> queue;
    queue.push(root);
    while (!queue.empty()) {
      const std::size_t v = queue.front();
      queue.pop();
      for (std::size_t w : adjacency[v]) {
        if (seen[w]) continue;
        seen[w] = 1;
        const std::size_t i = v < n ? v : w;
        const std::size_t j = (v < n ? w : v) - n;
        potential[w] = a(i, j) - potential[v];
        queue.push(w);
      }
    }
  }
  out.duals.lambda.assign(potential.begin(), potential.begin() + static_cast<std::ptrdiff_t>(n));
  out.duals.mu.assign(potential.begin() + static_cast<std::ptrdiff_t>(n), potential.end());
  // A column without support carries no equality; take the tightest feasible value.
  for (std::size_t j = 0; j < m; ++j) {
    if (!seen[n + j]) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) best = std::max(best, a(i, j) - out.duals.lambda[i]);
      out.duals.mu[j] = best;
    }
  }
  out.component.resize(n + m);
  for (std::size_t v = 0; v < n + m; ++v) out.component[v] = sets.find(v);
  return out;
}

double consistency_tolerance(const Matrix& a) {
  double scale = 1.0;
  for (double v : a.data()) scale = std::max(scale, std::abs(v));
  return 1e-9 * scale;
}

// Shifts whole support components (lambda += d, mu -= d) so that the
// off-support constraints lambda_i + mu_j >= a_ij hold, when such shifts
// exist. Difference constraints solved by Bellman-Ford.
void reanchor_components(const Matrix& a, ForestDuals& f) {
  const std::size_t n = a.rows();
  const std::size_t m = a.cols();
  std::vector<std::size_t> reps;
  for (std::size_t v = 0; v < n + m; ++v) reps.push_back(f.component[v]);
  std::sort(reps.begin(), reps.end());
  reps.erase(std::unique(reps.begin(), reps.end()), reps.end());
  if (reps.size() < 2) return;
  auto index_of = [&](std::size_t rep) {
    return static_cast<std::size_t>(std::lower_bound(reps.begin(), reps.end(), rep) - reps.begin());
  };
  struct Edge {
    std::size_t from, to;
    double weight;
  };
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t ki = index_of(f.component[i]);
      const std::size_t kj = index_of(f.component[n + j]);
      if (ki == kj) continue;
      // (lambda_i + d_ki) + (mu_j - d_kj) >= a_ij  <=>  d_kj <= d_ki + slack
      edges.push_back({ki, kj, f.duals.lambda[i] + f.duals.mu[j] - a(i, j)});
    }
  }
  Vector shift(reps.size(), 0.0);
  for (std::size_t round = 0; round < reps.size(); ++round) {
    bool changed = false;
    for (const Edge& e : edges) {
      if (shift[e.from] + e.weight < shift[e.to]) {
        shift[e.to] = shift[e.from] + e.weight;
        changed = true;
      }
    }
    if (!changed) break;
    if (round + 1 == reps.size()) return;  // negative cycle: no feasible shift
  }
  for (std::size_t i = 0; i < n; ++i) f.duals.lambda[i] += shift[index_of(f.component[i])];
  for (std::size_t j = 0; j < m; ++j) f.duals.mu[j] -= shift[index_of(f.component[n + j])];
}

Matrix max_form_weights(const OTProblem& problem) {
  Matrix a = problem.weights;
  if (problem.sense == Sense::Minimize) {
    for (double& v : a.data()) v = -v;
  }
  return a;
}

DualPotentials negate(DualPotentials d) {
  for (double& v : d.lambda) v = -v;
  for (double& v : d.mu) v = -v;
  return d;
}

void check_plan(const OTProblem& problem, const TransportPlan& plan) {
  if (plan.values.rows() != problem.n() || plan.values.cols() != problem.m()) {
    throw Error(ErrorCode::DimensionMismatch,
                "plan is " + std::to_string(plan.values.rows()) + "x" +
                    std::to_string(plan.values.cols()) + ", problem is " +
                    std::to_string(problem.n()) + "x" + std::to_string(problem.m()));
  }
  for (double v : plan.values.data()) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorCode::NonPositiveEntry, "plan entries must be finite and nonnegative");
    }
  }
}

}  // namespace

DualPotentials recover_duals(const OTProblem& problem, const TransportPlan& plan,
                             double support_threshold) {
  require_valid(problem);
  check_plan(problem, plan);
  const Matrix a = max_form_weights(problem);
  ForestDuals f = forest_duals(a, plan.values, support_threshold);
  const double tol = consistency_tolerance(a);
  const std::size_t m = problem.m();
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!f.support[k] || f.in_forest[k]) continue;
    const std::size_t i = k / m;
    const std::size_t j = k % m;
    const double gap = f.duals.lambda[i] + f.duals.mu[j] - a(i, j);
    if (std::abs(gap) > tol) {
      throw Error(ErrorCode::InconsistentSupport,
                  "support entry " + cell_name(i, j) + " violates lambda_i + mu_j = a_ij by " +
                      std::to_string(std::abs(gap)));
    }
  }
  return problem.sense == Sense::Minimize ? negate(std::move(f.duals)) : std::move(f.duals);
}

KKTReport verify_balanced(const OTProblem& problem, const TransportPlan& plan,
                          const std::optional<DualPotentials>& duals,
                          const VerifyOptions& options) {
  require_valid(problem);
  check_plan(problem, plan);
  const std::size_t n = problem.n();
  const std::size_t m = problem.m();
  const Matrix& x = plan.values;
  const bool maximize = problem.sense == Sense::Maximize;

  KKTReport report;
  std::vector<char> support(n * m, 0);
  const double top = max_entry(x);
  for (std::size_t k = 0; k < n * m; ++k) {
    support[k] = top > 0.0 && x.data()[k] > options.support_threshold * top;
  }

  if (duals) {
    if (duals->lambda.size() != n || duals->mu.size() != m) {
      throw Error(ErrorCode::DimensionMismatch, "dual vector lengths do not match problem");
    }
    report.duals = *duals;
  } else {
    const Matrix a = max_form_weights(problem);
    ForestDuals f = forest_duals(a, x, options.support_threshold);
    bool infeasible = false;
    for (std::size_t k = 0; k < n * m && !infeasible; ++k) {
      const std::size_t i = k / m;
      const std::size_t j = k % m;
      infeasible = !f.support[k] && a(i, j) - f.duals.lambda[i] - f.duals.mu[j] >
                                        std::log1p(options.tolerance);
    }
    if (infeasible) reanchor_components(a, f);
    report.duals = maximize ? std::move(f.duals) : negate(std::move(f.duals));
  }

  // Relative violations via alpha_i b_ij / beta_j = exp(a_ij - lambda_i - mu_j).
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double ratio_minus_one =
          std::expm1(problem.weights(i, j) - report.duals.lambda[i] - report.duals.mu[j]);
      double violation = 0.0;
      if (support[i * m + j]) {
        violation = std::abs(ratio_minus_one);
        report.max_slackness_violation = std::max(report.max_slackness_violation, violation);
      } else {
        violation = std::max(0.0, maximize ? ratio_minus_one : -ratio_minus_one);
        report.max_dual_infeasibility = std::max(report.max_dual_infeasibility, violation);
      }
      if (violation > options.tolerance && violation > worst) {
        worst = violation;
        report.worst_cell = Cell{i, j};
      }
    }
  }

  const double mass = std::accumulate(problem.row_marginals.begin(), problem.row_marginals.end(), 0.0);
  const TransportPlan fresh = make_plan(x, problem.row_marginals, problem.col_marginals);
  report.marginal_residuals = {fresh.row_residual / mass, fresh.col_residual / mass};
  report.objectives = compute_objectives(problem, x, &report.duals);
  const double sign = maximize ? 1.0 : -1.0;
  report.duality_gap = sign * (*report.objectives.dual_value - report.objectives.total_ot_value);
  report.is_balanced = report.max_slackness_violation <= options.tolerance &&
                       report.max_dual_infeasibility <= options.tolerance &&
                       report.marginal_residuals.first <= options.tolerance &&
                       report.marginal_residuals.second <= options.tolerance;
  return report;
}

KKTReport verify_balanced(const MOMAProblem& problem, const TransportPlan& plan,
                          const std::optional<DualPotentials>& duals,
                          const VerifyOptions& options) {
  KKTReport report = verify_balanced(moma_to_ot(problem), plan, duals, options);
  report.objectives = compute_objectives(problem, plan.values, &report.duals);
  return report;
}

std::size_t oracle_cell_limit() {
  const char* env = std::getenv("BT_MAX_ORACLE_CELLS");
  if (env == nullptr) return kDefaultOracleCells;
  std::size_t value = 0;
  const char* end = env + std::strlen(env);
  const auto [ptr, ec] = std::from_chars(env, end, value);
  if (ec != std::errc() || ptr != end || value == 0) return kDefaultOracleCells;
  return value;
}

namespace {

// Northwest-corner rule. With `basis` set, degenerate zero cells are recorded
// so that exactly n + m - 1 cells form a spanning tree.
Matrix northwest_corner(const OTProblem& problem, std::vector<std::size_t>* basis) {
  const std::size_t n = problem.n();
  const std::size_t m = problem.m();
  Matrix x(n, m);
  Vector rr = problem.row_marginals;
  Vector cc = problem.col_marginals;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < n && j < m) {
    const double q = std::min(rr[i], cc[j]);
    x(i, j) = q;
    if (basis) basis->push_back(i * m + j);
    rr[i] -= q;
    cc[j] -= q;
    if (rr[i] <= cc[j] && i + 1 < n) {
      ++i;
    } else {
      ++j;
    }
  }
  return x;
}

}  // namespace

TransportPlan greedy_northwest(const OTProblem& problem) {
  require_valid(problem);
  return make_plan(northwest_corner(problem, nullptr), problem.row_marginals,
                   problem.col_marginals);
}

OracleResult lp_oracle(const OTProblem& problem, std::size_t max_cells) {
  require_valid(problem);
  const std::size_t n = problem.n();
  const std::size_t m = problem.m();
  if (n * m > max_cells) {
    throw Error(ErrorCode::SizeGuardExceeded,
                std::to_string(n) + "x" + std::to_string(m) + " exceeds the oracle limit of " +
                    std::to_string(max_cells) + " cells (set BT_MAX_ORACLE_CELLS to raise it)");
  }
  const Matrix a = max_form_weights(problem);
  double scale = 1.0;
  for (double v : a.data()) scale = std::max(scale, std::abs(v));
  const double opt_tol = 1e-11 * scale;

  std::vector<std::size_t> basis_cells;
  Matrix x = northwest_corner(problem, &basis_cells);
  std::vector<char> basic(n * m, 0);
  std::vector<std::vector<std::size_t>> adjacency(n + m);  // node -> basic cells
  auto link = [&](std::size_t k) {
    basic[k] = 1;
    adjacency[k / m].push_back(k);
    adjacency[n + k % m].push_back(k);
  };
  auto unlink = [&](std::size_t k) {
    basic[k] = 0;
    for (std::size_t node : {k / m, n + k % m}) {
      auto& list = adjacency[node];
      list.erase(std::find(list.begin(), list.end(), k));
    }
  };
  for (std::size_t k : basis_cells) link(k);

  Vector u(n);
  Vector v(m);
  std::vector<std::size_t> parent_cell(n + m);
  std::vector<char> seen(n + m);
  // BFS over the basis tree from `root`; fills parent_cell and, when
  // `potentials` is set, u and v with u_i + v_j = a_ij on basic cells.
  auto traverse = [&](std::size_t root, bool potentials) {
    std::fill(seen.begin(), seen.end(), 0);
    std::queue<std::size_t> queue;
    queue.push(root);
    seen[root] = 1;
    if (potentials) u[0] = 0.0;
    while (!queue.empty()) {
      const std::size_t node = queue.front();
      queue.pop();
      for (std::size_t k : adjacency[node]) {
        const std::size_t i = k / m;
        const std::size_t j = k % m;
        const std::size_t other = node < n ? n + j : i;
        if (seen[other]) continue;
        seen[other] = 1;
        parent_cell[other] = k;
        if (potentials) {
          if (other >= n) {
            v[j] = a(i, j) - u[i];
          } else {
            u[i] = a(i, j) - v[j];
          }
        }
        queue.push(other);
      }
    }
  };

  OracleResult result;
  const std::size_t max_pivots = 1000 * (n + m) * (n + m) + 1000;
  while (true) {
    traverse(0, true);
    std::size_t entering = n * m;
    for (std::size_t k = 0; k < n * m; ++k) {
      if (!basic[k] && a(k / m, k % m) - u[k / m] - v[k % m] > opt_tol) {
        entering = k;
        break;
      }
    }
    if (entering == n * m) break;
    if (++result.pivots > max_pivots) {
      throw Error(ErrorCode::MaxItersExceeded, "transportation simplex exceeded its pivot limit");
    }

    // Tree path from the entering row to the entering column; along it the
    // cells alternate -, +, -, ... starting next to the row.
    const std::size_t ei = entering / m;
    const std::size_t ej = entering % m;
    traverse(ei, false);
    std::vector<std::size_t> path;
    for (std::size_t node = n + ej; node != ei;) {
      const std::size_t k = parent_cell[node];
      path.push_back(k);
      node = node >= n ? k / m : n + k % m;
    }
    std::reverse(path.begin(), path.end());
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leaving = n * m;
    for (std::size_t p = 0; p < path.size(); p += 2) {
      const std::size_t k = path[p];
      const double flow = x.data()[k];
      if (flow < theta || (flow == theta && k < leaving)) {
        theta = flow;
        leaving = k;
      }
    }
    for (std::size_t p = 0; p < path.size(); ++p) {
      double& flow = x.data()[path[p]];
      flow = p % 2 == 0 ? std::max(0.0, flow - theta) : flow + theta;
    }
    x.data()[leaving] = 0.0;
    x.data()[entering] = theta;
    unlink(leaving);
    link(entering);
  }

  traverse(0, true);
  result.min_nonbasic_slack = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n * m; ++k) {
    if (basic[k]) continue;
    result.min_nonbasic_slack =
        std::min(result.min_nonbasic_slack, u[k / m] + v[k % m] - a(k / m, k % m));
  }
  result.unique_optimum = result.min_nonbasic_slack > 1e-9;
  result.duals = DualPotentials{u, v};
  if (problem.sense == Sense::Minimize) result.duals = negate(std::move(result.duals));
  double objective = 0.0;
  for (std::size_t k = 0; k < n * m; ++k) objective += problem.weights.data()[k] * x.data()[k];
  result.objective = objective;
  result.plan = make_plan(std::move(x), problem.row_marginals, problem.col_marginals);
  return result;
}

}  // namespace bt
