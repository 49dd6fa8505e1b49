#pragma once

// Ground truth for the iterative solvers: the Hilbert projective metric, KKT
// certification of balanced solutions with dual recovery, an exact
// transportation simplex, and the northwest-corner greedy rule.

#include <array>
#include <optional>
#include <span>

#include "bt/core_model.hpp"

namespace bt {

/// log(max_i(x_i/y_i) / min_i(x_i/y_i)) for strictly positive vectors.
double hilbert_distance(std::span<const double> x, std::span<const double> y);

/// Plan entries above this fraction of the largest entry form the support.
inline constexpr double kSupportThreshold = 1e-10;

/// Potentials with lambda_i + mu_j = a_ij along a maximum-mass spanning forest
/// of the support graph (ties broken by row-major index), anchored at
/// lambda = 0 on the lowest-indexed row of each component. Throws
/// InconsistentSupport when a support entry outside the forest violates the
/// equality, which certifies that the plan is not optimal.
DualPotentials recover_duals(const OTProblem& problem, const TransportPlan& plan,
                             double support_threshold = kSupportThreshold);

struct Cell {
  std::size_t row = 0;  // 0-based
  std::size_t col = 0;
};

struct VerifyOptions {
  double tolerance = 1e-8;
  double support_threshold = kSupportThreshold;
};

struct KKTReport {
  bool is_balanced = false;
  // Worst |alpha_i b_ij - beta_j| / beta_j over the support.
  double max_slackness_violation = 0.0;
  // Worst positive (alpha_i b_ij - beta_j) / beta_j off the support
  // (sign reversed when minimizing).
  double max_dual_infeasibility = 0.0;
  // (max row residual, max column residual), relative to the total mass.
  std::pair<double, double> marginal_residuals{0.0, 0.0};
  ObjectiveReport objectives;
  double duality_gap = 0.0;  // sum lambda r + sum mu c - sum a x, in the problem's sense
  DualPotentials duals;
  std::optional<Cell> worst_cell;  // location of the largest violation, if any
};

/// Checks the balanced-solution conditions: alpha_i b_ij <= beta_j with
/// equality on the support, column sums c and row sums r. Duals are recovered
/// from the plan when not supplied.
KKTReport verify_balanced(const OTProblem& problem, const TransportPlan& plan,
                          const std::optional<DualPotentials>& duals = std::nullopt,
                          const VerifyOptions& options = {});
KKTReport verify_balanced(const MOMAProblem& problem, const TransportPlan& plan,
                          const std::optional<DualPotentials>& duals = std::nullopt,
                          const VerifyOptions& options = {});

inline constexpr std::size_t kDefaultOracleCells = 10000;

/// Oracle size guard: BT_MAX_ORACLE_CELLS when set to a positive integer,
/// otherwise 10^4.
std::size_t oracle_cell_limit();

struct OracleResult {
  TransportPlan plan;
  double objective = 0.0;
  DualPotentials duals;
  // All nonbasic reduced costs are strictly unfavourable by more than 1e-9,
  // which makes the optimal plan unique.
  bool unique_optimum = false;
  double min_nonbasic_slack = 0.0;
  std::size_t pivots = 0;
};

/// Transportation simplex: northwest-corner start, Bland's rule for entering
/// and leaving cells, 1e-11 optimality tolerance on reduced costs.
OracleResult lp_oracle(const OTProblem& problem, std::size_t max_cells = oracle_cell_limit());

/// x_ij = min(remaining r_i, remaining c_j) scanning rows then columns in
/// increasing order. Optimal when the weights have the Monge property.
TransportPlan greedy_northwest(const OTProblem& problem);

}  // namespace bt
