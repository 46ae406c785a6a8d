#include "mirror_sinkhorn/solver.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "mirror_sinkhorn/csv_io.hpp"
#include "mirror_sinkhorn/objectives.hpp"
#include "mirror_sinkhorn/rounding.hpp"

namespace mirror_sinkhorn {

namespace {

// Below this an entry of a linear-domain iterate is at risk of flushing to
// zero; the step is then taken in log domain instead.
constexpr double kUnderflowGuard = 1e-280;

void check_gradient(const Matrix& g, const Coupling& gamma) {
  if (g.rows() != gamma.rows() || g.cols() != gamma.cols()) {
    throw OracleError("gradient is " + std::to_string(g.rows()) + "x" + std::to_string(g.cols()) +
                      ", iterate is " + std::to_string(gamma.rows()) + "x" + std::to_string(gamma.cols()));
  }
  if (!g.allFinite()) throw OracleError("gradient has non-finite entries");
}

}  // namespace

Side side_for_iteration(std::int64_t t) { return t % 2 == 0 ? Side::rows : Side::cols; }

SolverState::SolverState(TransportPolytope spec)
    : spec_(std::move(spec)), gamma_(independent_coupling(spec_)), gamma_bar_(gamma_) {}

void SolverState::advance(const Matrix& gradient, double eta, const StepOptions& options) {
  check_gradient(gradient, gamma_);
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("step size must be finite and > 0");
  if (options.normalizations < 1) throw ConfigError("normalizations per step must be >= 1");

  const double peak = eta * gradient.cwiseAbs().maxCoeff();
  if (!log_domain_ && (peak > options.log_domain_threshold || gamma_.minCoeff() * std::exp(-peak) < kUnderflowGuard)) {
    log_gamma_ = gamma_.array().log().matrix();
    log_domain_ = true;
  }

  if (log_domain_) {
    log_gamma_.noalias() -= eta * gradient;
    for (int k = 0; k < options.normalizations; ++k) {
      if (side_for_iteration(t_ + k) == Side::rows) {
        row_normalize_log(log_gamma_, spec_.rows);
      } else {
        col_normalize_log(log_gamma_, spec_.cols);
      }
    }
    gamma_ = log_gamma_.array().exp().matrix();
  } else {
    gamma_.array() *= (-eta * gradient.array()).exp();
    for (int k = 0; k < options.normalizations; ++k) {
      if (side_for_iteration(t_ + k) == Side::rows) {
        row_normalize_in_place(gamma_, spec_.rows);
      } else {
        col_normalize_in_place(gamma_, spec_.cols);
      }
    }
  }
  normalizations_ += options.normalizations;

  if (options.update_average) {
    const double td = static_cast<double>(t_);
    gamma_bar_ = (td / (td + 1.0)) * gamma_bar_ + (1.0 / (td + 1.0)) * gamma_;
  }
  ++t_;
}

SolverState step(SolverState state, const Matrix& gradient, double eta, const StepOptions& options) {
  state.advance(gradient, eta, options);
  return state;
}

void SolverConfig::validate() const {
  schedule.validate();
  if (horizon < 1) throw ConfigError("horizon T must be >= 1");
  if (normalizations_per_step < 1) throw ConfigError("k_S must be >= 1");
  if (checkpoint_stride < 0) throw ConfigError("checkpoint stride must be >= 0");
  if (!(log_domain_threshold > 0.0)) throw ConfigError("log-domain threshold must be > 0");
}

bool is_checkpoint(std::int64_t t, std::int64_t horizon, std::int64_t stride) {
  if (t == horizon) return true;
  if (stride > 0) return t % stride == 0 || t == 1;
  return (t & (t - 1)) == 0;
}

namespace {

class CheckpointRecorder {
 public:
  explicit CheckpointRecorder(const SolverConfig& config)
      : config_(config), start_(std::chrono::steady_clock::now()) {}

  void record(RunTrace& trace, const SolverState& state, double eta_t, const ObjectiveEvaluator& f_eval) {
    const TransportPolytope& spec = state.spec();
    const Coupling& out = config_.averaging == Averaging::mean ? state.gamma_bar() : state.gamma();
    Checkpoint cp;
    cp.t = state.t();
    cp.normalizations = state.normalizations();
    if (f_eval) {
      cp.f_value = f_eval(out);
      if (config_.round_checkpoints) cp.f_rounded = f_eval(round_to_polytope(out, spec));
    }
    cp.c_avg = constraint_violation(state.gamma_bar(), spec);
    cp.c_iter = constraint_violation(state.gamma(), spec);
    cp.eta = eta_t;
    if (config_.record_timing) {
      cp.elapsed_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start_)
                          .count();
    }
    trace.checkpoints.push_back(cp);
  }

 private:
  const SolverConfig& config_;
  std::chrono::steady_clock::time_point start_;
};

void finish(RunTrace& trace, const SolverState& state, const SolverConfig& config) {
  trace.output = config.averaging == Averaging::mean ? state.gamma_bar() : state.gamma();
  trace.last_iterate = state.gamma();
  trace.rounded = round_to_polytope(trace.output, state.spec());
  trace.used_log_domain = state.log_domain();
}

}  // namespace

RunTrace solve(GradientOracle& oracle, const TransportPolytope& spec, const SolverConfig& config,
               const ObjectiveEvaluator& f_eval) {
  config.validate();
  SolverState state(spec);
  const StepOptions options{config.normalizations_per_step, config.log_domain_threshold, true};
  CheckpointRecorder recorder(config);
  RunTrace trace;
  for (std::int64_t t = 1; t <= config.horizon; ++t) {
    const double eta_t = eta(config.schedule, t);
    if (is_checkpoint(t, config.horizon, config.checkpoint_stride)) recorder.record(trace, state, eta_t, f_eval);
    if (t == config.horizon) break;
    state.advance(oracle.gradient(t, state.gamma()), eta_t, options);
  }
  finish(trace, state, config);
  return trace;
}

RunTrace solve_online(LossStream& stream, const TransportPolytope& spec, const SolverConfig& config) {
  SolverConfig online = config;
  online.averaging = Averaging::last_iterate;
  online.validate();
  SolverState state(spec);
  const StepOptions options{online.normalizations_per_step, online.log_domain_threshold, true};
  CheckpointRecorder recorder(online);
  RunTrace trace;
  trace.losses.reserve(static_cast<std::size_t>(online.horizon));
  trace.rounded_losses.reserve(static_cast<std::size_t>(online.horizon));
  for (std::int64_t t = 1; t <= online.horizon; ++t) {
    const Objective& f_t = stream.loss(t);
    const double eta_t = eta(online.schedule, t);
    trace.losses.push_back(f_t.value(state.gamma()));
    trace.rounded_losses.push_back(f_t.value(round_to_polytope(state.gamma(), spec)));
    if (is_checkpoint(t, online.horizon, online.checkpoint_stride)) {
      recorder.record(trace, state, eta_t, [&f_t](const Matrix& g) { return f_t.value(g); });
    }
    if (t == online.horizon) break;
    state.advance(f_t.gradient(state.gamma()), eta_t, options);
  }
  finish(trace, state, online);
  return trace;
}

std::string format_trace_csv(const RunTrace& trace) {
  std::string out = "t,normalizations,f_value,f_rounded,c_avg,c_iter,eta,elapsed_ns\n";
  for (const auto& cp : trace.checkpoints) {
    out += std::to_string(cp.t);
    out += ',';
    out += std::to_string(cp.normalizations);
    out += ',';
    if (cp.f_value) out += format_double(*cp.f_value);
    out += ',';
    if (cp.f_rounded) out += format_double(*cp.f_rounded);
    out += ',';
    out += format_double(cp.c_avg);
    out += ',';
    out += format_double(cp.c_iter);
    out += ',';
    out += format_double(cp.eta);
    out += ',';
    if (cp.elapsed_ns) out += std::to_string(*cp.elapsed_ns);
    out += '\n';
  }
  return out;
}

}  // namespace mirror_sinkhorn
