#pragma once

// Classical alternating-projection iterations: the non-regularized max/min
// weight update, the two forms of iterative proportional fitting, and the
// general multiplier iteration for strictly concave separable rewards.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bt/core_model.hpp"

namespace bt {

struct NonRegStep {
  Vector alpha_next;
  Vector beta;
};

/// beta_j = max_i alpha_i b_ij, alpha^_i = min_j beta_j / b_ij.
NonRegStep nonreg_step(std::span<const double> alpha, const Matrix& b);

struct IpfpVectorIterate {
  Vector u;
  Vector v;
  Matrix x;
};

/// Cumulative IPFP: v_j = c_j / sum_i u_i x0_ij, u_i = r_i / sum_j x0_ij v_j,
/// x_ij = u_i x0_ij v_j. Returns iterates 1..iters.
std::vector<IpfpVectorIterate> ipfp_vector(const Matrix& x0, std::span<const double> u0,
                                           std::span<const double> r,
                                           std::span<const double> c, std::size_t iters);

enum class IpfpOutcome { Converged, Cycling, IterationLimit };

const char* to_string(IpfpOutcome outcome);

struct IpfpOptions {
  double tol = 1e-12;  // converged when max marginal error / total mass <= tol
  bool record_iterates = true;
  // Cycling: the column error has not dropped below cycle_factor times its
  // running minimum for cycle_window consecutive iterations while staying
  // above cycle_floor.
  std::size_t cycle_window = 200;
  double cycle_factor = 0.9;
  double cycle_floor = 1e-6;
};

struct IpfpReport {
  std::vector<Matrix> iterates;  // x^(1), x^(2), ... when recorded
  std::vector<double> column_errors;  // after each full step
  IpfpOutcome outcome = IpfpOutcome::IterationLimit;
  std::size_t iterations = 0;
  Matrix final;
};

/// Incremental IPFP: column-normalize then row-normalize, at most `iters`
/// full steps. Requires every row and column of x0 to have a positive entry.
IpfpReport ipfp_matrix(const Matrix& x0, std::span<const double> r,
                       std::span<const double> c, std::size_t iters,
                       const IpfpOptions& options = {});

/// F_ij: the inverse of the marginal reward f'_ij, strictly decreasing and
/// positive on the whole real line.
struct ConcaveFamily {
  std::string label;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::function<double(std::size_t i, std::size_t j, double t)> inverse_marginal;
  double bracket_step = 1.0;  // initial width for geometric bracket expansion
};

/// Spot-checks monotonicity and positivity of every F_ij at t in {-1, 0, 1}.
void validate(const ConcaveFamily& family);

/// Entropic rewards a_ij x - eta x log x: F_ij(t) = scale * exp((a_ij - t)/eta - 1).
ConcaveFamily entropic_family(const Matrix& a, double eta, double scale = 1.0);
/// Isoelastic MOMA rewards in additive multipliers: F_ij(t) = (b_ij e^-t)^(1/eta).
ConcaveFamily isoelastic_family(const Matrix& b, double eta);

struct ConcaveParams {
  double tol = 1e-10;  // on max_j |col sum - c_j| / c_j after a sweep
  std::size_t max_iters = 10000;
  double root_tol = 1e-12;
  bool require_convergence = true;  // throw MaxItersExceeded when not converged
  bool record_plans = false;
};

struct ConcaveResult {
  DualPotentials duals;
  Matrix plan;
  std::vector<double> trace;  // column error after each sweep
  std::vector<Matrix> plans;  // after each sweep, when recorded
  std::size_t sweeps = 0;
  bool converged = false;
};

/// Alternates solving sum_i F_ij(lambda_i + mu_j) = c_j for every mu_j and
/// sum_j F_ij(lambda_i + mu_j) = r_i for every lambda_i, each by bisection
/// after geometric bracket expansion.
ConcaveResult concave_iteration(const ConcaveFamily& family, std::span<const double> r,
                                std::span<const double> c,
                                std::span<const double> init_lambda,
                                const ConcaveParams& params = {});

struct FixedPointReport {
  double theta = 0.0;  // max_i alpha^_i / alpha_i
  bool is_fixed_point = false;
  Vector component_ratios;
};

FixedPointReport fixed_point_report(std::span<const double> alpha,
                                    std::span<const double> alpha_next, double tol);

}  // namespace bt
