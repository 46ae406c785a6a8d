#pragma once

// Mirror Sinkhorn: a multiplicative gradient step followed by a single
// alternating row/column normalization, with a running average of the
// iterates.
//
//   gamma'_{t+1} = gamma_t * exp(-eta_t g_t)
//   gamma_{t+1}  = rows of gamma' scaled to mu   if t is even
//                  cols of gamma' scaled to nu   if t is odd
//
// starting from gamma_1 = mu nu^T. The iterate is stored as entrywise logs
// once a step would push |eta g| past `log_domain_threshold`; from then on
// the scalings subtract row/column log-sum-exp instead.

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "mirror_sinkhorn/schedules.hpp"
#include "mirror_sinkhorn/transport.hpp"

namespace mirror_sinkhorn {

struct OracleInfo {
  std::optional<double> lipschitz;  // B, objective units per l1
  double sigma = 0.0;               // bound on E||g - grad f||_inf^2 ^ (1/2)
  bool deterministic = true;
};

// Source of g_t given (t, gamma_t). Deterministic oracles return identical
// matrices for identical arguments; stochastic ones own their generator and
// serve a single run.
class GradientOracle {
 public:
  virtual ~GradientOracle() = default;
  virtual Matrix gradient(std::int64_t t, const Coupling& gamma) = 0;
  virtual OracleInfo info() const = 0;
};

enum class Averaging { mean, last_iterate };

enum class Side { rows, cols };

// Side normalized first at iteration t (even -> rows, odd -> cols).
Side side_for_iteration(std::int64_t t);

struct StepOptions {
  // k_S: alternating normalizations per gradient step, starting from the
  // side dictated by t.
  int normalizations = 1;
  double log_domain_threshold = 30.0;
  bool update_average = true;
};

class SolverState {
 public:
  // t = 1, gamma = gamma_bar = mu nu^T.
  explicit SolverState(TransportPolytope spec);

  std::int64_t t() const { return t_; }
  const Coupling& gamma() const { return gamma_; }
  const Coupling& gamma_bar() const { return gamma_bar_; }
  const TransportPolytope& spec() const { return spec_; }
  bool log_domain() const { return log_domain_; }
  // Entrywise log of gamma; meaningful only once log_domain() is true.
  const Matrix& log_gamma() const { return log_gamma_; }
  // Normalizations performed so far.
  std::int64_t normalizations() const { return normalizations_; }

  // Moves to t + 1. Throws OracleError on a misshapen or non-finite
  // gradient, ConfigError on eta <= 0 and DegenerateIterateError when a
  // row or column sum underflows.
  void advance(const Matrix& gradient, double eta, const StepOptions& options = {});

 private:
  TransportPolytope spec_;
  std::int64_t t_ = 1;
  std::int64_t normalizations_ = 0;
  Coupling gamma_;
  Coupling gamma_bar_;
  Matrix log_gamma_;
  bool log_domain_ = false;
};

SolverState step(SolverState state, const Matrix& gradient, double eta, const StepOptions& options = {});

struct SolverConfig {
  StepSchedule schedule;
  std::int64_t horizon = 1;  // T
  int normalizations_per_step = 1;
  Averaging averaging = Averaging::mean;
  double log_domain_threshold = 30.0;
  // 0 selects geometric checkpoints (powers of two plus T).
  std::int64_t checkpoint_stride = 0;
  std::uint64_t seed = 0;
  // Record wall time per checkpoint. Off by default so that reruns produce
  // identical traces.
  bool record_timing = false;
  // Also evaluate f on round(output) at each checkpoint.
  bool round_checkpoints = false;

  void validate() const;
};

bool is_checkpoint(std::int64_t t, std::int64_t horizon, std::int64_t stride);

struct Checkpoint {
  std::int64_t t = 0;
  std::int64_t normalizations = 0;
  std::optional<double> f_value;
  std::optional<double> f_rounded;
  double c_avg = 0.0;   // c(gamma_bar_t)
  double c_iter = 0.0;  // c(gamma_t)
  double eta = 0.0;
  std::optional<std::int64_t> elapsed_ns;
};

struct RunTrace {
  std::vector<Checkpoint> checkpoints;
  Coupling output;        // gamma_bar_T, or gamma_T without averaging
  Coupling last_iterate;  // gamma_T
  Coupling rounded;       // round(output)
  // Online runs: f_t(gamma_t) and f_t(round(gamma_t)) for t = 1..T.
  std::vector<double> losses;
  std::vector<double> rounded_losses;
  bool used_log_domain = false;
};

using ObjectiveEvaluator = std::function<double(const Matrix&)>;

// Runs T - 1 gradient steps so that the output is the mean of
// gamma_1..gamma_T (or gamma_T). f_eval, when given, is evaluated on the
// output quantity at each checkpoint.
RunTrace solve(GradientOracle& oracle, const TransportPolytope& spec, const SolverConfig& config,
               const ObjectiveEvaluator& f_eval = {});

class Objective;

// Loss f_t revealed at step t. The returned reference stays valid until the
// next call.
class LossStream {
 public:
  virtual ~LossStream() = default;
  virtual const Objective& loss(std::int64_t t) = 0;
};

// Online variant: the gradient at step t is grad f_t(gamma_t), no
// averaging. Records f_t(gamma_t) and f_t(round(gamma_t)) for every t.
RunTrace solve_online(LossStream& stream, const TransportPolytope& spec, const SolverConfig& config);

// Trace CSV with header
//   t,normalizations,f_value,f_rounded,c_avg,c_iter,eta,elapsed_ns
// Absent values are empty fields.
std::string format_trace_csv(const RunTrace& trace);

}  // namespace mirror_sinkhorn
