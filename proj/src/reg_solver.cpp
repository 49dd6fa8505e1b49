#include "bt/reg_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>

namespace bt {

namespace {

// Neumaier-compensated running sum; used for the cumulative log multipliers
// so that recovered scalings stay consistent with z over long runs.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + carry; }
};

void require_eta(double eta) {
  if (!(eta >= kMinEta) || !std::isfinite(eta)) {
    throw Error(ErrorCode::InvalidArgument,
                "eta must be a finite number >= 1e-8 (the temperature floor), got " +
                    std::to_string(eta));
  }
}

void require_positive(std::span<const double> v, const char* name) {
  for (double x : v) {
    if (!std::isfinite(x) || x <= 0.0) {
      throw Error(ErrorCode::NonPositiveEntry, std::string(name) + " must be strictly positive");
    }
  }
}

void require_finite_multiplier(double v, const char* name) {
  if (!std::isfinite(v) || v <= 0.0) {
    throw Error(ErrorCode::NonFinite, std::string(name) + " multiplier is not a positive finite number");
  }
}

// Strided max-factored p-norm so columns can be normed in place.
double strided_p_norm(const double* v, std::size_t count, std::size_t stride, double p) {
  double top = 0.0;
  for (std::size_t k = 0; k < count; ++k) top = std::max(top, v[k * stride]);
  if (top == 0.0) return 0.0;
  if (p == 1.0) {
    double s = 0.0;
    for (std::size_t k = 0; k < count; ++k) s += v[k * stride];
    return s;
  }
  // Ratios below this contribute terms < 4.3e-18 to a sum that is >= 1.
  const double cutoff = std::exp(-40.0 / p);
  double s = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const double ratio = v[k * stride] / top;
    if (ratio < cutoff) continue;
    s += std::pow(ratio, p);
  }
  return top * std::pow(s, 1.0 / p);
}

void apply_columns(Matrix& z, std::span<const double> s) {
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto row = z.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] *= s[j];
  }
}

Vector row_multipliers_and_apply(Matrix& z, double eta, std::span<const double> r) {
  const double p = 1.0 / eta;
  Vector t(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto row = z.row(i);
    const double norm = strided_p_norm(row.data(), row.size(), 1, p);
    t[i] = std::pow(r[i], eta) / norm;
    require_finite_multiplier(t[i], "row");
    for (double& v : row) v *= t[i];
  }
  return t;
}

}  // namespace

void validate(const RegParams& params) {
  require_eta(params.eta);
  if (!(params.tol > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "tol must be positive");
  }
  if (params.max_iters < 1) {
    throw Error(ErrorCode::InvalidArgument, "max_iters must be at least 1");
  }
}

double p_norm(std::span<const double> v, double p) {
  if (!(p >= 1.0)) throw Error(ErrorCode::InvalidArgument, "p-norm requires p >= 1");
  return strided_p_norm(v.data(), v.size(), 1, p);
}

Equilibration row_equilibrate(const Matrix& b) {
  require_positive(b.data(), "matrix entries");
  const std::size_t n = b.rows();
  const std::size_t m = b.cols();
  Vector colmax(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) colmax[j] = std::max(colmax[j], b(i, j));
  }
  Equilibration out{Matrix(n, m), Vector(n)};
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t j = 0; j < m; ++j) {
      const double ratio = colmax[j] / b(i, j);
      if (ratio < best) {
        best = ratio;
        arg = j;
      }
    }
    out.alpha[i] = best;
    for (std::size_t j = 0; j < m; ++j) {
      // Rounding of alpha_i * b_ij may overshoot the column maximum by an ulp.
      out.scaled(i, j) = std::min(best * b(i, j), colmax[j]);
    }
    out.scaled(i, arg) = colmax[arg];
  }
  return out;
}

PhiStep phi_eta_step(std::span<const double> alpha, const MOMAProblem& problem, double eta) {
  require_eta(eta);
  require_valid(problem);
  if (alpha.size() != problem.n()) {
    throw Error(ErrorCode::DimensionMismatch, "alpha length does not match the row count");
  }
  require_positive(alpha, "alpha");
  const std::size_t n = problem.n();
  const std::size_t m = problem.m();
  const double p = 1.0 / eta;
  const Matrix& b = problem.coefficients;

  PhiStep out{Vector(n), Vector(m)};
  Vector buf(std::max(n, m));
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < n; ++i) buf[i] = alpha[i] * b(i, j);
    out.beta[j] = p_norm({buf.data(), n}, p) / std::pow(problem.col_marginals[j], eta);
    require_finite_multiplier(out.beta[j], "beta");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) buf[j] = b(i, j) / out.beta[j];
    out.alpha_next[i] = std::pow(problem.row_marginals[i], eta) / p_norm({buf.data(), m}, p);
    require_finite_multiplier(out.alpha_next[i], "alpha");
  }
  if (std::equal(alpha.begin(), alpha.end(), out.alpha_next.begin()) &&
      detail::update_map_collapsed(alpha, problem, eta)) {
    throw Error(ErrorCode::NumericalDegeneracy,
                "eta is too small: norms and powers have collapsed to the non-regularized map");
  }
  return out;
}

namespace detail {

bool update_map_collapsed(std::span<const double> alpha, const MOMAProblem& problem,
                          double eta) {
  bool any_power = false;
  auto powers_collapsed = [&](const Vector& marginals) {
    for (double v : marginals) {
      if (v == 1.0) continue;
      any_power = true;
      if (std::pow(v, eta) != 1.0) return false;
    }
    return true;
  };
  if (!powers_collapsed(problem.row_marginals) || !powers_collapsed(problem.col_marginals)) {
    return false;
  }
  const std::size_t n = problem.n();
  const std::size_t m = problem.m();
  const double p = 1.0 / eta;
  bool any_norm = false;
  Vector buf;
  auto norm_collapsed = [&](const Vector& v) {
    if (v.size() < 2) return true;
    any_norm = true;
    return p_norm(v, p) == *std::max_element(v.begin(), v.end());
  };
  Vector beta(m);
  for (std::size_t j = 0; j < m; ++j) {
    buf.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) buf[i] = alpha[i] * problem.coefficients(i, j);
    if (!norm_collapsed(buf)) return false;
    beta[j] = *std::max_element(buf.begin(), buf.end());
  }
  for (std::size_t i = 0; i < n; ++i) {
    buf.assign(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) buf[j] = problem.coefficients(i, j) / beta[j];
    if (!norm_collapsed(buf)) return false;
  }
  return any_power && any_norm;
}

}  // namespace detail

Vector column_multipliers(const ZState& state, std::span<const double> c) {
  require_eta(state.eta);
  const Matrix& z = state.z;
  if (c.size() != z.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "column marginals do not match z");
  }
  const double p = 1.0 / state.eta;
  Vector s(z.cols());
  for (std::size_t j = 0; j < z.cols(); ++j) {
    const double norm = strided_p_norm(z.data().data() + j, z.rows(), z.cols(), p);
    s[j] = std::pow(c[j], state.eta) / norm;
    require_finite_multiplier(s[j], "column");
  }
  return s;
}

ZStepResult z_step(const ZState& state, std::span<const double> r, std::span<const double> c) {
  if (r.size() != state.z.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "row marginals do not match z");
  }
  ZStepResult out{state, {}};
  out.multipliers.col_step = column_multipliers(state, c);
  apply_columns(out.state.z, out.multipliers.col_step);
  out.multipliers.row_step = row_multipliers_and_apply(out.state.z, state.eta, r);
  ++out.state.iteration;
  return out;
}

double criterion(std::span<const double> col_step, double eta) {
  if (col_step.empty()) return 0.0;
  require_positive(col_step, "column multipliers");
  const auto [lo, hi] = std::minmax_element(col_step.begin(), col_step.end());
  return std::log(*hi / *lo) / eta;
}

double criterion(const StepMultipliers& multipliers, double eta) {
  return criterion(multipliers.col_step, eta);
}

Matrix extract_plan(const ZState& state) {
  Matrix x = state.z;
  if (state.eta == 1.0) return x;
  const double p = 1.0 / state.eta;
  for (double& v : x.data()) v = std::pow(v, p);
  return x;
}

void validate(const AnnealingSchedule& schedule) {
  if (schedule.stages.empty()) {
    throw Error(ErrorCode::InvalidArgument, "schedule has no stages");
  }
  for (std::size_t k = 0; k < schedule.stages.size(); ++k) {
    validate(RegParams{schedule.stages[k].eta, schedule.stages[k].tol, 1});
    if (k > 0 && !(schedule.stages[k].eta < schedule.stages[k - 1].eta)) {
      throw Error(ErrorCode::InvalidArgument, "schedule temperatures must be strictly decreasing");
    }
  }
}

AnnealingSchedule make_schedule(double eta_final, std::size_t stages, double factor, double tol) {
  require_eta(eta_final);
  if (stages < 1) throw Error(ErrorCode::InvalidArgument, "schedule needs at least one stage");
  if (!(factor > 1.0) || !std::isfinite(factor)) {
    throw Error(ErrorCode::InvalidArgument, "annealing factor must be > 1");
  }
  AnnealingSchedule schedule;
  for (std::size_t k = 0; k < stages; ++k) {
    const double exponent = static_cast<double>(stages - 1 - k);
    const double eta = k + 1 == stages ? eta_final : eta_final * std::pow(factor, exponent);
    schedule.stages.push_back({eta, tol});
  }
  validate(schedule);
  return schedule;
}

AnnealingSchedule single_stage(double eta, double tol) {
  AnnealingSchedule schedule{{{eta, tol}}};
  validate(schedule);
  return schedule;
}

SolveResult solve(const OTProblem& problem, const AnnealingSchedule& schedule,
                  const SolveOptions& options) {
  require_valid(problem);
  validate(schedule);
  if (options.max_iters < 1) throw Error(ErrorCode::InvalidArgument, "max_iters must be >= 1");

  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  // Work in the maximization form; minimization uses b = exp(-a).
  OTProblem work = problem;
  const bool minimize = problem.sense == Sense::Minimize;
  if (minimize) {
    for (double& a : work.weights.data()) a = -a;
    work.sense = Sense::Maximize;
  }
  const MOMAProblem moma = ot_to_moma(work);
  const std::span<const double> r = moma.row_marginals;
  const std::span<const double> c = moma.col_marginals;
  const std::size_t n = moma.n();
  const std::size_t m = moma.m();

  Equilibration eq = row_equilibrate(moma.coefficients);
  ZState state{std::move(eq.scaled), schedule.stages.front().eta, 0};
  std::vector<CompensatedSum> log_alpha(n);
  std::vector<CompensatedSum> log_s(m);
  for (std::size_t i = 0; i < n; ++i) log_alpha[i].add(std::log(eq.alpha[i]));

  SolveResult result;
  for (std::size_t stage_index = 0; stage_index < schedule.stages.size(); ++stage_index) {
    const AnnealingStage& stage = schedule.stages[stage_index];
    const bool last_stage = stage_index + 1 == schedule.stages.size();
    state.eta = stage.eta;

    StageSummary summary{stage.eta, stage.tol, 0, 0.0, false};
    struct Best {
      double criterion;
      ZState state;
      std::vector<CompensatedSum> log_alpha;
      std::vector<CompensatedSum> log_s;
    };
    std::optional<Best> best;

    while (true) {
      const Vector s = column_multipliers(state, c);
      const double crit = criterion(s, stage.eta);
      summary.final_criterion = crit;
      if (result.trace.records.empty() ||
          result.trace.records.back().iteration != state.iteration) {
        result.trace.records.push_back({state.iteration, stage.eta, crit, elapsed()});
        if (options.snapshot_stride > 0 && state.iteration % options.snapshot_stride == 0) {
          result.trace.snapshots.push_back({state.iteration, extract_plan(state)});
        }
      }
      // Row sums are exact only after a full step at this temperature.
      if (summary.iterations > 0) {
        if (crit < stage.tol) {
          summary.converged = true;
          break;
        }
        if (last_stage && (!best || crit < best->criterion)) {
          best = Best{crit, state, log_alpha, log_s};
        }
      }
      if (summary.iterations == options.max_iters) break;

      apply_columns(state.z, s);
      const Vector t = row_multipliers_and_apply(state.z, stage.eta, r);
      for (std::size_t j = 0; j < m; ++j) log_s[j].add(std::log(s[j]));
      for (std::size_t i = 0; i < n; ++i) log_alpha[i].add(std::log(t[i]));
      ++state.iteration;
      ++summary.iterations;

      const bool stalled = std::all_of(s.begin(), s.end(), [](double v) { return v == 1.0; }) &&
                           std::all_of(t.begin(), t.end(), [](double v) { return v == 1.0; });
      if (stalled && crit >= stage.tol) {
        throw Error(ErrorCode::NumericalDegeneracy,
                    "iteration stalled above tolerance at eta = " + std::to_string(stage.eta));
      }
    }

    if (!summary.converged) {
      result.status = SolveStatus::MaxItersExceeded;
      if (last_stage && best) {
        state = std::move(best->state);
        log_alpha = std::move(best->log_alpha);
        log_s = std::move(best->log_s);
        summary.final_criterion = best->criterion;
      }
    }
    result.stages.push_back(summary);
  }

  result.total_iterations = state.iteration;
  result.plan = make_plan(extract_plan(state), problem.row_marginals, problem.col_marginals);
  result.duals.lambda.resize(n);
  result.duals.mu.resize(m);
  result.scalings.alpha.resize(n);
  result.scalings.beta.resize(m);
  const double sign = minimize ? -1.0 : 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double la = log_alpha[i].value();
    result.scalings.alpha[i] = std::exp(la);
    result.duals.lambda[i] = -sign * la;
  }
  for (std::size_t j = 0; j < m; ++j) {
    const double ls = log_s[j].value();
    result.scalings.beta[j] = std::exp(-ls);
    result.duals.mu[j] = -sign * ls;
  }
  result.final_state = std::move(state);
  return result;
}

double isoelastic_utility(double x, double eta) {
  if (!(x > 0.0)) throw Error(ErrorCode::InvalidArgument, "isoelastic utility needs x > 0");
  if (eta == 1.0) return std::log(x);
  return std::pow(x, 1.0 - eta) / (1.0 - eta);
}

}  // namespace bt
