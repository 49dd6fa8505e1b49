#pragma once

// Isoelastic-regularized scaling iteration in its norm-stable multiplicative
// form. The iteration state is the matrix z_ij = alpha_i b_ij / beta_j; the
// transport plan at temperature eta is x_ij = z_ij^(1/eta). All p-norms with
// p = 1/eta are evaluated in max-factored form so that no intermediate
// exceeds max(v) * length.

#include <cstddef>
#include <span>
#include <vector>

#include "bt/core_model.hpp"

namespace bt {

/// Smallest accepted temperature. Below this the p-norms collapse to
/// max-norms and the iteration stalls in the non-regularized map.
inline constexpr double kMinEta = 1e-8;
inline constexpr std::size_t kDefaultMaxIters = 100000;

struct RegParams {
  double eta = 1e-3;
  double tol = 1e-2;
  std::size_t max_iters = kDefaultMaxIters;
};

void validate(const RegParams& params);

struct ZState {
  Matrix z;
  double eta = 1.0;
  std::size_t iteration = 0;
};

/// Incremental multipliers of one full step: s scales columns, t scales rows.
struct StepMultipliers {
  Vector col_step;  // s, length m
  Vector row_step;  // t, length n
};

/// ||v||_p computed as M * (sum (v_i/M)^p)^(1/p) with M = max v_i.
/// Entries must be nonnegative. p == 1 is a plain sum.
double p_norm(std::span<const double> v, double p);

struct Equilibration {
  Matrix scaled;  // alpha_i b_ij
  Vector alpha;
};

/// alpha_i = min_j (max_k b_kj) / b_ij. Every row of the result contains an
/// entry equal to its column maximum.
Equilibration row_equilibrate(const Matrix& b);

struct PhiStep {
  Vector alpha_next;
  Vector beta;
};

/// One application of the regularized update map:
///   beta_j  = ||alpha . b_.j||_{1/eta} / c_j^eta
///   alpha^_i = r_i^eta / ||b_i. / beta||_{1/eta}
PhiStep phi_eta_step(std::span<const double> alpha, const MOMAProblem& problem, double eta);

namespace detail {
// True when every power and every multi-entry norm evaluated by the update
// map has collapsed numerically (c^eta == 1 for marginals != 1 and
// ||v||_{1/eta} == max(v) for vectors of length >= 2), i.e. the map has
// degenerated into the non-regularized max/min update.
bool update_map_collapsed(std::span<const double> alpha, const MOMAProblem& problem,
                          double eta);
}  // namespace detail

struct ZStepResult {
  ZState state;
  StepMultipliers multipliers;
};

/// One full step: s_j = c_j^eta / ||z_.j||, z <- s z; t_i = r_i^eta / ||z_i.||,
/// z <- t z. Throws NonFinite if a multiplier overflows or underflows.
ZStepResult z_step(const ZState& state, std::span<const double> r,
                   std::span<const double> c);

/// Column multipliers s for the current state (the first half of z_step).
Vector column_multipliers(const ZState& state, std::span<const double> c);

/// (1/eta) log(max_j s_j / min_j s_j). Equals the Hilbert distance between
/// the column sums of the current plan and c.
double criterion(std::span<const double> col_step, double eta);
double criterion(const StepMultipliers& multipliers, double eta);

/// x_ij = z_ij^(1/eta).
Matrix extract_plan(const ZState& state);

struct AnnealingStage {
  double eta = 1e-3;
  double tol = 1e-2;
};

struct AnnealingSchedule {
  std::vector<AnnealingStage> stages;
};

void validate(const AnnealingSchedule& schedule);

/// stage k (0-based) has eta_k = eta_final * factor^(stages-1-k); the last
/// stage uses eta_final exactly. Every stage uses `tol`.
AnnealingSchedule make_schedule(double eta_final, std::size_t stages, double factor,
                                double tol = 1e-2);
AnnealingSchedule single_stage(double eta, double tol = 1e-2);

struct TraceRecord {
  std::size_t iteration = 0;  // global full-step count at the evaluated state
  double eta = 0.0;
  double criterion = 0.0;
  double wall_time = 0.0;  // seconds since the start of solve
};

struct PlanSnapshot {
  std::size_t iteration = 0;
  Matrix plan;
};

struct ConvergenceTrace {
  std::vector<TraceRecord> records;
  std::vector<PlanSnapshot> snapshots;
};

struct SolveOptions {
  std::size_t max_iters = kDefaultMaxIters;  // per stage
  std::size_t snapshot_stride = 0;  // 0 disables plan snapshots
};

enum class SolveStatus { Converged, MaxItersExceeded };

struct StageSummary {
  double eta = 0.0;
  double tol = 0.0;
  std::size_t iterations = 0;
  double final_criterion = 0.0;
  bool converged = false;
};

struct SolveResult {
  TransportPlan plan;
  Scalings scalings;
  DualPotentials duals;
  ConvergenceTrace trace;
  std::vector<StageSummary> stages;
  SolveStatus status = SolveStatus::Converged;
  ZState final_state;
  std::size_t total_iterations = 0;
};

/// Runs the staged iteration: b = exp(a) (exp(-a) when minimizing), row
/// equilibration, z = b^, then per stage iterate until the criterion drops
/// below the stage tolerance. z carries over between stages unchanged, so the
/// dual potentials are the warm start. If a stage exhausts max_iters the run
/// continues and the result is flagged MaxItersExceeded; for the last stage
/// the iterate with the smallest criterion is returned.
///
/// Scalings are cumulative: alpha = equilibration * prod t, beta = 1 / prod s,
/// so that x_ij = (alpha_i b_ij / beta_j)^(1/eta_final).
SolveResult solve(const OTProblem& problem, const AnnealingSchedule& schedule,
                  const SolveOptions& options = {});

/// Isoelastic utility x^(1-eta)/(1-eta), log(x) at eta == 1.
double isoelastic_utility(double x, double eta);

}  // namespace bt
