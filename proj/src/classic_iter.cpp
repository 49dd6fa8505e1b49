#include "bt/classic_iter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace bt {

namespace {

void require_positive(std::span<const double> v, const char* name) {
  for (double x : v) {
    if (!std::isfinite(x) || x <= 0.0) {
      throw Error(ErrorCode::NonPositiveEntry, std::string(name) + " must be strictly positive");
    }
  }
}

void require_shape(const Matrix& x, std::span<const double> r, std::span<const double> c) {
  if (x.rows() != r.size() || x.cols() != c.size() || x.empty()) {
    throw Error(ErrorCode::DimensionMismatch, "matrix shape does not match marginals");
  }
}

double total(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

double max_abs_error(const Vector& sums, std::span<const double> target) {
  double worst = 0.0;
  for (std::size_t k = 0; k < sums.size(); ++k) {
    worst = std::max(worst, std::abs(sums[k] - target[k]));
  }
  return worst;
}

}  // namespace

NonRegStep nonreg_step(std::span<const double> alpha, const Matrix& b) {
  if (alpha.size() != b.rows() || b.empty()) {
    throw Error(ErrorCode::DimensionMismatch, "alpha length does not match the row count");
  }
  require_positive(alpha, "alpha");
  require_positive(b.data(), "b");
  const std::size_t n = b.rows();
  const std::size_t m = b.cols();
  NonRegStep out{Vector(n, std::numeric_limits<double>::infinity()), Vector(m, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out.beta[j] = std::max(out.beta[j], alpha[i] * b(i, j));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      out.alpha_next[i] = std::min(out.alpha_next[i], out.beta[j] / b(i, j));
    }
  }
  return out;
}

std::vector<IpfpVectorIterate> ipfp_vector(const Matrix& x0, std::span<const double> u0,
                                           std::span<const double> r,
                                           std::span<const double> c, std::size_t iters) {
  require_shape(x0, r, c);
  if (u0.size() != x0.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "u0 length does not match the row count");
  }
  require_positive(u0, "u0");
  if (iters < 1) throw Error(ErrorCode::InvalidArgument, "iters must be >= 1");
  const std::size_t n = x0.rows();
  const std::size_t m = x0.cols();
  std::vector<IpfpVectorIterate> out;
  out.reserve(iters);
  Vector u(u0.begin(), u0.end());
  Vector v(m);
  for (std::size_t k = 0; k < iters; ++k) {
    for (std::size_t j = 0; j < m; ++j) {
      double d = 0.0;
      for (std::size_t i = 0; i < n; ++i) d += u[i] * x0(i, j);
      if (!(d > 0.0)) throw Error(ErrorCode::DivisionDegeneracy, "column denominator vanished");
      v[j] = c[j] / d;
    }
    for (std::size_t i = 0; i < n; ++i) {
      double d = 0.0;
      for (std::size_t j = 0; j < m; ++j) d += x0(i, j) * v[j];
      if (!(d > 0.0)) throw Error(ErrorCode::DivisionDegeneracy, "row denominator vanished");
      u[i] = r[i] / d;
    }
    Matrix x(n, m);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) x(i, j) = u[i] * x0(i, j) * v[j];
    }
    out.push_back({u, v, std::move(x)});
  }
  return out;
}

const char* to_string(IpfpOutcome outcome) {
  switch (outcome) {
    case IpfpOutcome::Converged: return "converged";
    case IpfpOutcome::Cycling: return "cycling";
    case IpfpOutcome::IterationLimit: return "iteration-limit";
  }
  return "unknown";
}

IpfpReport ipfp_matrix(const Matrix& x0, std::span<const double> r, std::span<const double> c,
                       std::size_t iters, const IpfpOptions& options) {
  require_shape(x0, r, c);
  for (double v : x0.data()) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorCode::NonPositiveEntry, "IPFP start matrix must be nonnegative");
    }
  }
  const Vector rs0 = row_sums(x0);
  const Vector cs0 = col_sums(x0);
  for (std::size_t i = 0; i < rs0.size(); ++i) {
    if (!(rs0[i] > 0.0)) throw Error(ErrorCode::ZeroLine, "row " + std::to_string(i + 1) + " is all zero");
  }
  for (std::size_t j = 0; j < cs0.size(); ++j) {
    if (!(cs0[j] > 0.0)) throw Error(ErrorCode::ZeroLine, "column " + std::to_string(j + 1) + " is all zero");
  }

  const double mass = total(c);
  IpfpReport report;
  report.final = x0;
  if (std::max(max_abs_error(rs0, r), max_abs_error(cs0, c)) / mass <= options.tol) {
    report.outcome = IpfpOutcome::Converged;
    return report;
  }

  Matrix& x = report.final;
  const std::size_t n = x.rows();
  const std::size_t m = x.cols();
  double anchor = std::numeric_limits<double>::infinity();
  std::size_t last_improvement = 0;
  for (std::size_t k = 1; k <= iters; ++k) {
    const Vector cs = col_sums(x);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) x(i, j) *= c[j] / cs[j];
    }
    const Vector rs = row_sums(x);
    for (std::size_t i = 0; i < n; ++i) {
      const double f = r[i] / rs[i];
      for (double& v : x.row(i)) v *= f;
    }
    report.iterations = k;
    if (options.record_iterates) report.iterates.push_back(x);
    const double err = max_abs_error(col_sums(x), c) / mass;
    report.column_errors.push_back(err);
    if (err <= options.tol) {
      report.outcome = IpfpOutcome::Converged;
      return report;
    }
    if (err < options.cycle_factor * anchor) {
      anchor = err;
      last_improvement = k;
    } else if (k - last_improvement >= options.cycle_window && err > options.cycle_floor) {
      report.outcome = IpfpOutcome::Cycling;
      return report;
    }
  }
  report.outcome = IpfpOutcome::IterationLimit;
  return report;
}

void validate(const ConcaveFamily& family) {
  if (family.rows == 0 || family.cols == 0 || !family.inverse_marginal) {
    throw Error(ErrorCode::InvalidArgument, "concave family '" + family.label + "' is empty");
  }
  if (!(family.bracket_step > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "bracket_step must be positive");
  }
  for (std::size_t i = 0; i < family.rows; ++i) {
    for (std::size_t j = 0; j < family.cols; ++j) {
      const double lo = family.inverse_marginal(i, j, -1.0);
      const double mid = family.inverse_marginal(i, j, 0.0);
      const double hi = family.inverse_marginal(i, j, 1.0);
      if (!(lo > 0.0 && mid > 0.0 && hi > 0.0)) {
        throw Error(ErrorCode::InvalidArgument,
                    "family '" + family.label + "' is not positive at (" + std::to_string(i + 1) +
                        "," + std::to_string(j + 1) + ")");
      }
      if (!(lo > mid && mid > hi)) {
        throw Error(ErrorCode::InvalidArgument,
                    "family '" + family.label + "' is not strictly decreasing at (" +
                        std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
      }
    }
  }
}

ConcaveFamily entropic_family(const Matrix& a, double eta, double scale) {
  if (!(eta > 0.0) || !(scale > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "entropic family needs eta > 0 and scale > 0");
  }
  return ConcaveFamily{
      "entropic", a.rows(), a.cols(),
      [a, eta, scale](std::size_t i, std::size_t j, double t) {
        return scale * std::exp((a(i, j) - t) / eta - 1.0);
      },
      1.0};
}

ConcaveFamily isoelastic_family(const Matrix& b, double eta) {
  if (!(eta > 0.0)) throw Error(ErrorCode::InvalidArgument, "isoelastic family needs eta > 0");
  for (double v : b.data()) {
    if (!(v > 0.0)) throw Error(ErrorCode::NonPositiveEntry, "isoelastic family needs b > 0");
  }
  return ConcaveFamily{
      "isoelastic", b.rows(), b.cols(),
      [b, eta](std::size_t i, std::size_t j, double t) {
        return std::exp((std::log(b(i, j)) - t) / eta);
      },
      1.0};
}

namespace {

// Root of the decreasing function g on the real line, starting from `start`.
template <typename G>
double solve_decreasing(G g, double start, double step, double root_tol, const std::string& what) {
  constexpr int kMaxExpansions = 200;
  constexpr int kMaxBisections = 400;
  double g0 = g(start);
  if (std::isnan(g0)) throw Error(ErrorCode::RootBracketFailure, what + ": NaN at start");
  if (g0 == 0.0) return start;
  double lo = start;
  double hi = start;
  const double direction = g0 > 0.0 ? 1.0 : -1.0;
  double width = step;
  for (int k = 0;; ++k) {
    if (k == kMaxExpansions) {
      throw Error(ErrorCode::RootBracketFailure, what + ": bracket expansion failed");
    }
    const double probe = start + direction * width;
    const double gp = g(probe);
    if (std::isnan(gp)) throw Error(ErrorCode::RootBracketFailure, what + ": NaN during expansion");
    if ((direction > 0.0 && gp <= 0.0) || (direction < 0.0 && gp >= 0.0)) {
      (direction > 0.0 ? hi : lo) = probe;
      break;
    }
    (direction > 0.0 ? lo : hi) = probe;
    width *= 2.0;
  }
  for (int k = 0; k < kMaxBisections; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo <= root_tol * std::max(1.0, std::abs(mid)) || mid == lo || mid == hi) break;
    const double gm = g(mid);
    if (std::isnan(gm)) throw Error(ErrorCode::RootBracketFailure, what + ": NaN during bisection");
    if (gm > 0.0) {
      lo = mid;
    } else if (gm < 0.0) {
      hi = mid;
    } else {
      return mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

ConcaveResult concave_iteration(const ConcaveFamily& family, std::span<const double> r,
                                std::span<const double> c, std::span<const double> init_lambda,
                                const ConcaveParams& params) {
  validate(family);
  const std::size_t n = family.rows;
  const std::size_t m = family.cols;
  if (r.size() != n || c.size() != m || init_lambda.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "marginals or initial multipliers do not match the family");
  }
  require_positive(r, "r");
  require_positive(c, "c");
  const auto& F = family.inverse_marginal;

  ConcaveResult out;
  out.duals.lambda.assign(init_lambda.begin(), init_lambda.end());
  out.duals.mu.assign(m, 0.0);
  Vector& lambda = out.duals.lambda;
  Vector& mu = out.duals.mu;

  auto assemble = [&] {
    Matrix x(n, m);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) x(i, j) = F(i, j, lambda[i] + mu[j]);
    }
    return x;
  };

  for (std::size_t sweep = 1; sweep <= params.max_iters; ++sweep) {
    for (std::size_t j = 0; j < m; ++j) {
      auto g = [&](double t) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += F(i, j, lambda[i] + t);
        return s - c[j];
      };
      mu[j] = solve_decreasing(g, mu[j], family.bracket_step, params.root_tol,
                               "column " + std::to_string(j + 1));
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto g = [&](double t) {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += F(i, j, t + mu[j]);
        return s - r[i];
      };
      lambda[i] = solve_decreasing(g, lambda[i], family.bracket_step, params.root_tol,
                                   "row " + std::to_string(i + 1));
    }
    out.sweeps = sweep;
    out.plan = assemble();
    if (params.record_plans) out.plans.push_back(out.plan);
    const Vector cs = col_sums(out.plan);
    double err = 0.0;
    for (std::size_t j = 0; j < m; ++j) err = std::max(err, std::abs(cs[j] - c[j]) / c[j]);
    out.trace.push_back(err);
    if (err <= params.tol) {
      out.converged = true;
      return out;
    }
  }
  if (params.require_convergence) {
    throw Error(ErrorCode::MaxItersExceeded,
                "multiplier iteration did not reach tolerance in " +
                    std::to_string(params.max_iters) + " sweeps");
  }
  return out;
}

FixedPointReport fixed_point_report(std::span<const double> alpha,
                                    std::span<const double> alpha_next, double tol) {
  if (alpha.size() != alpha_next.size() || alpha.empty()) {
    throw Error(ErrorCode::LengthMismatch, "weight vectors differ in length");
  }
  FixedPointReport report;
  report.component_ratios.resize(alpha.size());
  double deviation = 0.0;
  report.theta = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double q = alpha_next[i] / alpha[i];
    report.component_ratios[i] = q;
    report.theta = std::max(report.theta, q);
    deviation = std::max(deviation, std::abs(q - 1.0));
  }
  report.is_fixed_point = deviation <= tol;
  return report;
}

}  // namespace bt
