#include "bt/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace bt {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonPositiveMarginal: return "NonPositiveMarginal";
    case ErrorCode::GlobalFeasibilityViolation: return "GlobalFeasibilityViolation";
    case ErrorCode::NonPositiveCoefficient: return "NonPositiveCoefficient";
    case ErrorCode::NonFiniteEntry: return "NonFiniteEntry";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::NonPositiveWeight: return "NonPositiveWeight";
    case ErrorCode::NonPositiveScale: return "NonPositiveScale";
    case ErrorCode::NonPositiveEntry: return "NonPositiveEntry";
    case ErrorCode::NumericalDegeneracy: return "NumericalDegeneracy";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::MaxItersExceeded: return "MaxItersExceeded";
    case ErrorCode::DivisionDegeneracy: return "DivisionDegeneracy";
    case ErrorCode::ZeroLine: return "ZeroLine";
    case ErrorCode::RootBracketFailure: return "RootBracketFailure";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InconsistentSupport: return "InconsistentSupport";
    case ErrorCode::SizeGuardExceeded: return "SizeGuardExceeded";
    case ErrorCode::ZeroMarginal: return "ZeroMarginal";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

const char* to_string(Sense sense) {
  return sense == Sense::Maximize ? "maximize" : "minimize";
}

Sense flip(Sense sense) {
  return sense == Sense::Maximize ? Sense::Minimize : Sense::Maximize;
}

TransportPlan make_plan(Matrix values, std::span<const double> r,
                        std::span<const double> c) {
  if (values.rows() != r.size() || values.cols() != c.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "plan is " + std::to_string(values.rows()) + "x" +
                    std::to_string(values.cols()) + " but marginals are " +
                    std::to_string(r.size()) + " and " + std::to_string(c.size()));
  }
  TransportPlan plan;
  const Vector rs = row_sums(values);
  const Vector cs = col_sums(values);
  for (std::size_t i = 0; i < r.size(); ++i) {
    plan.row_residual = std::max(plan.row_residual, std::abs(rs[i] - r[i]));
  }
  for (std::size_t j = 0; j < c.size(); ++j) {
    plan.col_residual = std::max(plan.col_residual, std::abs(cs[j] - c[j]));
  }
  plan.values = std::move(values);
  return plan;
}

DualPotentials to_potentials(const Scalings& s) {
  DualPotentials d;
  d.lambda.reserve(s.alpha.size());
  d.mu.reserve(s.beta.size());
  for (double a : s.alpha) d.lambda.push_back(-std::log(a));
  for (double b : s.beta) d.mu.push_back(std::log(b));
  return d;
}

Scalings to_scalings(const DualPotentials& d) {
  Scalings s;
  s.alpha.reserve(d.lambda.size());
  s.beta.reserve(d.mu.size());
  for (double l : d.lambda) s.alpha.push_back(std::exp(-l));
  for (double m : d.mu) s.beta.push_back(std::exp(m));
  return s;
}

TransformSpec reciprocal(const TransformSpec& spec) {
  TransformSpec out;
  for (double p : spec.row_weights) out.row_weights.push_back(1.0 / p);
  for (double q : spec.col_weights) out.col_weights.push_back(1.0 / q);
  out.scale = 1.0 / spec.scale;
  return out;
}

namespace {

double dot_row(std::span<const double> coeff, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t j = 0; j < coeff.size(); ++j) s += coeff[j] * x[j];
  return s;
}

std::optional<double> dual_value(const DualPotentials* duals,
                                 std::span<const double> r,
                                 std::span<const double> c) {
  if (duals == nullptr) return std::nullopt;
  if (duals->lambda.size() != r.size() || duals->mu.size() != c.size()) {
    throw Error(ErrorCode::DimensionMismatch, "dual vector lengths do not match problem");
  }
  double v = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) v += duals->lambda[i] * r[i];
  for (std::size_t j = 0; j < c.size(); ++j) v += duals->mu[j] * c[j];
  return v;
}

void check_plan_shape(std::size_t n, std::size_t m, const Matrix& plan) {
  if (plan.rows() != n || plan.cols() != m) {
    throw Error(ErrorCode::DimensionMismatch, "plan shape does not match problem");
  }
}

}  // namespace

ObjectiveReport compute_objectives(const OTProblem& problem, const Matrix& plan,
                                   const DualPotentials* duals) {
  check_plan_shape(problem.n(), problem.m(), plan);
  ObjectiveReport report;
  report.per_row_values.resize(problem.n());
  for (std::size_t i = 0; i < problem.n(); ++i) {
    double s = 0.0;
    double t = 0.0;
    for (std::size_t j = 0; j < problem.m(); ++j) {
      s += std::exp(problem.weights(i, j)) * plan(i, j);
      t += problem.weights(i, j) * plan(i, j);
    }
    report.per_row_values[i] = s;
    report.total_ot_value += t;
  }
  report.dual_value = dual_value(duals, problem.row_marginals, problem.col_marginals);
  return report;
}

ObjectiveReport compute_objectives(const MOMAProblem& problem, const Matrix& plan,
                                   const DualPotentials* duals) {
  check_plan_shape(problem.n(), problem.m(), plan);
  ObjectiveReport report;
  report.per_row_values.resize(problem.n());
  for (std::size_t i = 0; i < problem.n(); ++i) {
    report.per_row_values[i] = dot_row(problem.coefficients.row(i), plan.row(i));
    double t = 0.0;
    for (std::size_t j = 0; j < problem.m(); ++j) {
      t += std::log(problem.coefficients(i, j)) * plan(i, j);
    }
    report.total_ot_value += t;
  }
  report.dual_value = dual_value(duals, problem.row_marginals, problem.col_marginals);
  return report;
}

namespace {

ValidationResult fail(ErrorCode code, std::string message) {
  return ValidationResult{code, std::move(message)};
}

std::string cell(std::size_t i, std::size_t j) {
  return "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
}

// Shared checks on shape, finiteness, marginal positivity and global
// feasibility. `entries` is the weight or coefficient matrix.
ValidationResult validate_common(const Matrix& entries, const Vector& r,
                                 const Vector& c, const char* entry_name) {
  if (entries.rows() == 0 || entries.cols() == 0) {
    return fail(ErrorCode::DimensionMismatch, "problem must have n >= 1 and m >= 1");
  }
  if (r.size() != entries.rows() || c.size() != entries.cols()) {
    return fail(ErrorCode::DimensionMismatch,
                "marginal lengths (" + std::to_string(r.size()) + ", " +
                    std::to_string(c.size()) + ") do not match " +
                    std::to_string(entries.rows()) + "x" +
                    std::to_string(entries.cols()) + " " + entry_name);
  }
  for (std::size_t i = 0; i < entries.rows(); ++i) {
    for (std::size_t j = 0; j < entries.cols(); ++j) {
      if (!std::isfinite(entries(i, j))) {
        return fail(ErrorCode::NonFiniteEntry,
                    std::string(entry_name) + " entry " + cell(i, j) + " is not finite");
      }
    }
  }
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!std::isfinite(r[i])) {
      return fail(ErrorCode::NonFiniteEntry, "r_" + std::to_string(i + 1) + " is not finite");
    }
    if (r[i] <= 0.0) {
      return fail(ErrorCode::NonPositiveMarginal,
                  "r_" + std::to_string(i + 1) + " = " + std::to_string(r[i]) + " is not positive");
    }
  }
  for (std::size_t j = 0; j < c.size(); ++j) {
    if (!std::isfinite(c[j])) {
      return fail(ErrorCode::NonFiniteEntry, "c_" + std::to_string(j + 1) + " is not finite");
    }
    if (c[j] <= 0.0) {
      return fail(ErrorCode::NonPositiveMarginal,
                  "c_" + std::to_string(j + 1) + " = " + std::to_string(c[j]) + " is not positive");
    }
  }
  return {};
}

ValidationResult validate_feasibility(const Vector& r, const Vector& c) {
  const double sr = std::accumulate(r.begin(), r.end(), 0.0);
  const double sc = std::accumulate(c.begin(), c.end(), 0.0);
  if (std::abs(sr - sc) > kFeasibilityTolerance * std::max(sr, sc)) {
    std::ostringstream os;
    os.precision(17);
    os << "sum(r) = " << sr << " differs from sum(c) = " << sc;
    return fail(ErrorCode::GlobalFeasibilityViolation, os.str());
  }
  return {};
}

void throw_if_invalid(const ValidationResult& v) {
  if (!v.ok()) throw Error(*v.error, v.message);
}

}  // namespace

ValidationResult validate_problem(const OTProblem& problem) {
  auto v = validate_common(problem.weights, problem.row_marginals,
                           problem.col_marginals, "weights");
  if (!v.ok()) return v;
  return validate_feasibility(problem.row_marginals, problem.col_marginals);
}

ValidationResult validate_problem(const MOMAProblem& problem) {
  auto v = validate_common(problem.coefficients, problem.row_marginals,
                           problem.col_marginals, "coefficients");
  if (!v.ok()) return v;
  for (std::size_t i = 0; i < problem.n(); ++i) {
    for (std::size_t j = 0; j < problem.m(); ++j) {
      if (problem.coefficients(i, j) <= 0.0) {
        return fail(ErrorCode::NonPositiveCoefficient,
                    "coefficient " + cell(i, j) + " is not positive");
      }
    }
  }
  return validate_feasibility(problem.row_marginals, problem.col_marginals);
}

void require_valid(const OTProblem& problem) { throw_if_invalid(validate_problem(problem)); }
void require_valid(const MOMAProblem& problem) { throw_if_invalid(validate_problem(problem)); }

MOMAProblem ot_to_moma(const OTProblem& problem) {
  require_valid(problem);
  MOMAProblem out{Matrix(problem.n(), problem.m()), problem.row_marginals,
                  problem.col_marginals, problem.sense};
  for (std::size_t i = 0; i < problem.n(); ++i) {
    for (std::size_t j = 0; j < problem.m(); ++j) {
      const double b = std::exp(problem.weights(i, j));
      if (!std::isfinite(b) || b <= 0.0 || !std::isnormal(b)) {
        throw Error(ErrorCode::Overflow,
                    "exp(a" + cell(i, j) + ") is not representable as a positive normal double");
      }
      out.coefficients(i, j) = b;
    }
  }
  return out;
}

OTProblem moma_to_ot(const MOMAProblem& problem) {
  require_valid(problem);
  OTProblem out{Matrix(problem.n(), problem.m()), problem.row_marginals,
                problem.col_marginals, problem.sense};
  for (std::size_t i = 0; i < problem.n(); ++i) {
    for (std::size_t j = 0; j < problem.m(); ++j) {
      out.weights(i, j) = std::log(problem.coefficients(i, j));
    }
  }
  return out;
}

namespace {

void require_positive_spec(const TransformSpec& spec, std::size_t n, std::size_t m) {
  if (spec.row_weights.size() != n || spec.col_weights.size() != m) {
    throw Error(ErrorCode::DimensionMismatch, "transform weights do not match problem shape");
  }
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!std::all_of(spec.row_weights.begin(), spec.row_weights.end(), positive) ||
      !std::all_of(spec.col_weights.begin(), spec.col_weights.end(), positive)) {
    throw Error(ErrorCode::NonPositiveWeight, "transform weights must be strictly positive");
  }
  if (!positive(spec.scale)) {
    throw Error(ErrorCode::NonPositiveWeight, "transform scale must be strictly positive");
  }
}

}  // namespace

MOMAProblem unweight(const MOMAProblem& problem, const TransformSpec& spec) {
  require_positive_spec(spec, problem.n(), problem.m());
  MOMAProblem out = problem;
  for (std::size_t i = 0; i < problem.n(); ++i) {
    out.row_marginals[i] = spec.row_weights[i] * problem.row_marginals[i] / spec.scale;
    for (std::size_t j = 0; j < problem.m(); ++j) {
      out.coefficients(i, j) =
          problem.coefficients(i, j) / (spec.row_weights[i] * spec.col_weights[j]);
    }
  }
  for (std::size_t j = 0; j < problem.m(); ++j) {
    out.col_marginals[j] = spec.col_weights[j] * problem.col_marginals[j] / spec.scale;
  }
  return out;
}

Matrix map_plan_back(const Matrix& transformed_plan, const TransformSpec& spec) {
  require_positive_spec(spec, transformed_plan.rows(), transformed_plan.cols());
  Matrix out(transformed_plan.rows(), transformed_plan.cols());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) {
      out(i, j) = spec.scale * transformed_plan(i, j) /
                  (spec.row_weights[i] * spec.col_weights[j]);
    }
  }
  return out;
}

MOMAProblem conjugate_linear(const MOMAProblem& problem) {
  require_valid(problem);
  MOMAProblem out = problem;
  for (double& b : out.coefficients.data()) b = 1.0 / b;
  out.sense = flip(problem.sense);
  return out;
}

MOMAProblem rescale(const MOMAProblem& problem, double s) {
  if (!std::isfinite(s) || s <= 0.0) {
    throw Error(ErrorCode::NonPositiveScale, "scale must be a positive finite number");
  }
  MOMAProblem out = problem;
  for (double& r : out.row_marginals) r /= s;
  for (double& c : out.col_marginals) c /= s;
  return out;
}

namespace {

// `violates(i1, i2, j1, j2)` returns true when the minor breaks the property.
template <typename Violates>
MongeResult scan_minors(std::size_t n, std::size_t m, Violates violates) {
  for (std::size_t i1 = 0; i1 < n; ++i1) {
    for (std::size_t i2 = i1 + 1; i2 < n; ++i2) {
      for (std::size_t j1 = 0; j1 < m; ++j1) {
        for (std::size_t j2 = j1 + 1; j2 < m; ++j2) {
          if (violates(i1, i2, j1, j2)) {
            return MongeResult{false, std::array<std::size_t, 4>{i1, i2, j1, j2}};
          }
        }
      }
    }
  }
  return {};
}

}  // namespace

MongeResult monge_check(const OTProblem& problem) {
  const Matrix& a = problem.weights;
  const bool maximize = problem.sense == Sense::Maximize;
  return scan_minors(problem.n(), problem.m(),
                     [&](std::size_t i1, std::size_t i2, std::size_t j1, std::size_t j2) {
                       const double diag = a(i1, j1) + a(i2, j2);
                       const double anti = a(i1, j2) + a(i2, j1);
                       return maximize ? diag < anti : diag > anti;
                     });
}

MongeResult monge_check(const MOMAProblem& problem) {
  const Matrix& b = problem.coefficients;
  const bool maximize = problem.sense == Sense::Maximize;
  return scan_minors(problem.n(), problem.m(),
                     [&](std::size_t i1, std::size_t i2, std::size_t j1, std::size_t j2) {
                       const double diag = b(i1, j1) * b(i2, j2);
                       const double anti = b(i1, j2) * b(i2, j1);
                       return maximize ? diag < anti : diag > anti;
                     });
}

}  // namespace bt
