#pragma once

// Problem, plan and scaling types for discrete optimal transport and its
// linear multi-objective (MOMA) counterpart, plus the problem-level
// transforms that relate the two.

#include <array>
#include <optional>
#include <string>

#include "bt/error.hpp"
#include "bt/matrix.hpp"

namespace bt {

enum class Sense { Maximize, Minimize };

const char* to_string(Sense sense);
Sense flip(Sense sense);

/// Relative slack allowed in the global feasibility condition sum(r) == sum(c).
inline constexpr double kFeasibilityTolerance = 1e-10;

/// Additive form: optimise sum_ij a_ij x_ij subject to row sums r and column
/// sums c. Weights may be any finite reals.
struct OTProblem {
  Matrix weights;
  Vector row_marginals;
  Vector col_marginals;
  Sense sense = Sense::Maximize;

  std::size_t n() const { return weights.rows(); }
  std::size_t m() const { return weights.cols(); }
};

/// Multiplicative form: one objective sum_j b_ij x_ij per row, with strictly
/// positive coefficients.
struct MOMAProblem {
  Matrix coefficients;
  Vector row_marginals;
  Vector col_marginals;
  Sense sense = Sense::Maximize;

  std::size_t n() const { return coefficients.rows(); }
  std::size_t m() const { return coefficients.cols(); }
};

/// Nonnegative allocation with cached marginal residuals. Build through
/// make_plan so that the residuals always match the values.
struct TransportPlan {
  Matrix values;
  double row_residual = 0.0;  // max_i |sum_j x_ij - r_i|
  double col_residual = 0.0;  // max_j |sum_i x_ij - c_j|
};

TransportPlan make_plan(Matrix values, std::span<const double> r,
                        std::span<const double> c);

/// Utility weights alpha (rows) and column multipliers beta, all positive.
struct Scalings {
  Vector alpha;
  Vector beta;
};

/// Additive duals: lambda = -log(alpha), mu = log(beta).
struct DualPotentials {
  Vector lambda;
  Vector mu;
};

DualPotentials to_potentials(const Scalings& s);
Scalings to_scalings(const DualPotentials& d);

/// Row weights p, column weights q and a global scale s for turning a problem
/// with weighted sums (sum_i p_i x_ij = c_j, sum_j q_j x_ij = r_i) into an
/// unweighted one.
struct TransformSpec {
  Vector row_weights;
  Vector col_weights;
  double scale = 1.0;
};

TransformSpec reciprocal(const TransformSpec& spec);

struct ObjectiveReport {
  Vector per_row_values;  // sum_j b_ij x_ij
  double total_ot_value = 0.0;  // sum_ij a_ij x_ij
  std::optional<double> dual_value;  // sum_i lambda_i r_i + sum_j mu_j c_j
};

ObjectiveReport compute_objectives(const OTProblem& problem, const Matrix& plan,
                                   const DualPotentials* duals = nullptr);
ObjectiveReport compute_objectives(const MOMAProblem& problem, const Matrix& plan,
                                   const DualPotentials* duals = nullptr);

/// Outcome of validate_problem. An empty `error` means the problem is valid.
struct ValidationResult {
  std::optional<ErrorCode> error;
  std::string message;

  bool ok() const { return !error.has_value(); }
  explicit operator bool() const { return ok(); }
};

ValidationResult validate_problem(const OTProblem& problem);
ValidationResult validate_problem(const MOMAProblem& problem);

// Throwing variants used as preconditions by the solvers.
void require_valid(const OTProblem& problem);
void require_valid(const MOMAProblem& problem);

/// b_ij = exp(a_ij). Throws Overflow when some exp(a_ij) is not a finite
/// positive double.
MOMAProblem ot_to_moma(const OTProblem& problem);
/// a_ij = log(b_ij). Throws NonPositiveCoefficient on b_ij <= 0.
OTProblem moma_to_ot(const MOMAProblem& problem);

/// Applies x~_ij = p_i q_j x_ij / s to the data: r~ = p r / s, c~ = q c / s,
/// b~_ij = b_ij / (p_i q_j).
MOMAProblem unweight(const MOMAProblem& problem, const TransformSpec& spec);
/// Maps a plan of the unweighted problem back: x_ij = s x~_ij / (p_i q_j).
Matrix map_plan_back(const Matrix& transformed_plan, const TransformSpec& spec);

/// b_ij -> 1/b_ij with the sense flipped.
MOMAProblem conjugate_linear(const MOMAProblem& problem);

/// Divides both marginal vectors by s.
MOMAProblem rescale(const MOMAProblem& problem, double s);

struct MongeResult {
  bool holds = true;
  // 0-based (i1, i2, j1, j2) of the lexicographically first violating minor.
  std::optional<std::array<std::size_t, 4>> violation;
};

/// Exact check of a_{i1j1} + a_{i2j2} >= a_{i1j2} + a_{i2j1} for i1<i2, j1<j2
/// (the inequality is reversed for minimization).
MongeResult monge_check(const OTProblem& problem);
/// Multiplicative form: every 2x2 determinant of b is >= 0 (<= 0 when
/// minimizing).
MongeResult monge_check(const MOMAProblem& problem);

}  // namespace bt
