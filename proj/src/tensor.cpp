#include "mirror_sinkhorn/tensor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "mirror_sinkhorn/csv_io.hpp"

namespace mirror_sinkhorn {

namespace {

constexpr double kUnderflowGuard = 1e-280;

// log S_k for a tensor of entrywise logs, one log-sum-exp per slice.
Vector log_mode_marginal(const DenseTensor& log_gamma, std::size_t k) {
  const auto mk = static_cast<Index>(log_gamma.shape()[k]);
  Vector peak = Vector::Constant(mk, -std::numeric_limits<double>::infinity());
  for (std::size_t f = 0; f < log_gamma.size(); ++f) {
    auto& p = peak[static_cast<Index>(log_gamma.coordinate(f, k))];
    p = std::max(p, log_gamma[f]);
  }
  Vector acc = Vector::Zero(mk);
  for (std::size_t f = 0; f < log_gamma.size(); ++f) {
    const auto i = static_cast<Index>(log_gamma.coordinate(f, k));
    acc[i] += std::exp(log_gamma[f] - peak[i]);
  }
  return peak.array() + acc.array().log();
}

// D_KL(mu, S) with S given through its logs.
double kl_from_logs(const Marginal& mu, const Vector& log_s) {
  double total = 0.0;
  for (Index i = 0; i < mu.size(); ++i) {
    total += mu[i] * (std::log(mu[i]) - log_s[i]) + std::exp(log_s[i]) - mu[i];
  }
  return total;
}

std::size_t greedy_mode(const std::vector<double>& distances) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < distances.size(); ++k) {
    if (distances[k] > distances[best]) best = k;
  }
  return best;
}

}  // namespace

DenseTensor::DenseTensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  if (shape_.empty()) throw DimensionError("tensor needs at least one mode");
  std::size_t total = 1;
  for (auto mk : shape_) {
    if (mk == 0) throw DimensionError("tensor modes must be non-empty");
    if (total > kMaxEntries / mk) throw SizeLimitError("tensor exceeds 1e8 entries");
    total *= mk;
  }
  strides_.assign(shape_.size(), 1);
  for (std::size_t k = shape_.size() - 1; k > 0; --k) strides_[k - 1] = strides_[k] * shape_[k];
  data_.assign(total, fill);
}

DenseTensor DenseTensor::outer(const std::vector<Vector>& factors) {
  std::vector<std::size_t> shape;
  for (const auto& v : factors) shape.push_back(static_cast<std::size_t>(v.size()));
  DenseTensor out(shape, 1.0);
  for (std::size_t f = 0; f < out.size(); ++f) {
    double prod = 1.0;
    for (std::size_t k = 0; k < factors.size(); ++k) prod *= factors[k][static_cast<Index>(out.coordinate(f, k))];
    out.data_[f] = prod;
  }
  return out;
}

std::size_t DenseTensor::flat_index(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size()) throw DimensionError("tensor index has the wrong rank");
  std::size_t flat = 0;
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= shape_[k]) throw DimensionError("tensor index out of range");
    flat += index[k] * strides_[k];
  }
  return flat;
}

double& DenseTensor::at(std::span<const std::size_t> index) { return data_[flat_index(index)]; }

double DenseTensor::at(std::span<const std::size_t> index) const { return data_[flat_index(index)]; }

double DenseTensor::sum() const {
  double total = 0.0;
  for (double v : data_) total += v;
  return total;
}

std::vector<std::size_t> TensorPolytope::shape() const {
  std::vector<std::size_t> out;
  for (const auto& mu : marginals) out.push_back(static_cast<std::size_t>(mu.size()));
  return out;
}

EntropicRadius entropic_radius(const TensorPolytope& spec) {
  double delta = 0.0;
  for (const auto& mu : spec.marginals) delta += mu.log_radius();
  return {delta};
}

DenseTensor independent_coupling(const TensorPolytope& spec) {
  std::vector<Vector> factors;
  for (const auto& mu : spec.marginals) factors.push_back(mu.values());
  return DenseTensor::outer(factors);
}

Vector mode_marginal(const DenseTensor& gamma, std::size_t k) {
  if (k >= gamma.rank()) {
    throw DimensionError("mode " + std::to_string(k) + " out of range for a rank-" + std::to_string(gamma.rank()) +
                         " tensor");
  }
  Vector out = Vector::Zero(static_cast<Index>(gamma.shape()[k]));
  for (std::size_t f = 0; f < gamma.size(); ++f) out[static_cast<Index>(gamma.coordinate(f, k))] += gamma[f];
  return out;
}

double constraint_violation(const DenseTensor& gamma, const TensorPolytope& spec) {
  if (gamma.shape() != spec.shape()) throw DimensionError("tensor shape differs from its marginals");
  double total = 0.0;
  for (std::size_t k = 0; k < spec.rank(); ++k) total += (mode_marginal(gamma, k) - spec.marginals[k].values()).lpNorm<1>();
  return total;
}

LinearTensorObjective::LinearTensorObjective(DenseTensor cost) : cost_(std::move(cost)) {
  for (double v : cost_.data()) {
    if (!std::isfinite(v)) throw DomainError("cost tensor has non-finite entries");
  }
}

double LinearTensorObjective::value(const DenseTensor& gamma) const {
  if (!gamma.same_shape(cost_)) throw DimensionError("linear tensor objective: shape mismatch");
  double total = 0.0;
  for (std::size_t f = 0; f < gamma.size(); ++f) total += cost_[f] * gamma[f];
  return total;
}

DenseTensor LinearTensorObjective::gradient(std::int64_t, const DenseTensor& gamma) {
  if (!gamma.same_shape(cost_)) throw DimensionError("linear tensor objective: shape mismatch");
  return cost_;
}

OracleInfo LinearTensorObjective::info() const {
  double b = 0.0;
  for (double v : cost_.data()) b = std::max(b, std::abs(v));
  return {b, 0.0, true};
}

TensorSolverState::TensorSolverState(TensorPolytope spec)
    : spec_(std::move(spec)), gamma_(independent_coupling(spec_)), gamma_bar_(gamma_) {
  if (spec_.rank() < 2) throw DimensionError("tensor problems need at least two modes");
}

TensorStepReport TensorSolverState::advance(const DenseTensor& gradient, double eta, double log_domain_threshold) {
  if (!gradient.same_shape(gamma_)) throw OracleError("tensor gradient has the wrong shape");
  double peak = 0.0;
  for (double v : gradient.data()) {
    if (!std::isfinite(v)) throw OracleError("tensor gradient has non-finite entries");
    peak = std::max(peak, std::abs(v));
  }
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("step size must be finite and > 0");
  peak *= eta;

  const std::size_t d = spec_.rank();
  TensorStepReport report;
  report.distances.resize(d);

  if (!log_domain_) {
    const double smallest = *std::min_element(gamma_.data().begin(), gamma_.data().end());
    if (peak > log_domain_threshold || smallest * std::exp(-peak) < kUnderflowGuard) {
      log_gamma_ = gamma_;
      for (auto& v : log_gamma_.data()) v = std::log(v);
      log_domain_ = true;
    }
  }

  if (log_domain_) {
    for (std::size_t f = 0; f < log_gamma_.size(); ++f) log_gamma_[f] -= eta * gradient[f];
    std::vector<Vector> log_s(d);
    for (std::size_t k = 0; k < d; ++k) {
      log_s[k] = log_mode_marginal(log_gamma_, k);
      report.distances[k] = kl_from_logs(spec_.marginals[k], log_s[k]);
    }
    report.mode = greedy_mode(report.distances);
    const auto& target = spec_.marginals[report.mode];
    if (!log_s[report.mode].allFinite()) throw DegenerateIterateError("a slice vanished in log domain");
    for (std::size_t f = 0; f < log_gamma_.size(); ++f) {
      const auto i = static_cast<Index>(log_gamma_.coordinate(f, report.mode));
      log_gamma_[f] += std::log(target[i]) - log_s[report.mode][i];
      gamma_[f] = std::exp(log_gamma_[f]);
    }
  } else {
    for (std::size_t f = 0; f < gamma_.size(); ++f) gamma_[f] *= std::exp(-eta * gradient[f]);
    std::vector<Vector> s(d);
    for (std::size_t k = 0; k < d; ++k) {
      s[k] = mode_marginal(gamma_, k);
      report.distances[k] = kl_divergence(spec_.marginals[k].values(), s[k]);
    }
    report.mode = greedy_mode(report.distances);
    const auto& target = spec_.marginals[report.mode];
    const Vector& sums = s[report.mode];
    for (Index i = 0; i < sums.size(); ++i) {
      if (!(sums[i] > 0.0) || !std::isfinite(sums[i])) {
        throw DegenerateIterateError("slice " + std::to_string(i) + " of mode " + std::to_string(report.mode) +
                                     " has non-positive sum");
      }
    }
    const Vector factor = target.values().array() / sums.array();
    for (std::size_t f = 0; f < gamma_.size(); ++f) {
      gamma_[f] *= factor[static_cast<Index>(gamma_.coordinate(f, report.mode))];
    }
  }

  const double td = static_cast<double>(t_);
  for (std::size_t f = 0; f < gamma_.size(); ++f) {
    gamma_bar_[f] = (td / (td + 1.0)) * gamma_bar_[f] + (1.0 / (td + 1.0)) * gamma_[f];
  }
  ++t_;
  return report;
}

TensorRunTrace tensor_solve(TensorGradientOracle& oracle, const TensorPolytope& spec, const SolverConfig& config,
                            const TensorObjectiveEvaluator& f_eval) {
  config.validate();
  TensorSolverState state(spec);
  TensorRunTrace trace;
  const auto start = std::chrono::steady_clock::now();
  for (std::int64_t t = 1; t <= config.horizon; ++t) {
    const double eta_t = eta(config.schedule, t);
    if (is_checkpoint(t, config.horizon, config.checkpoint_stride)) {
      const DenseTensor& out = config.averaging == Averaging::mean ? state.gamma_bar() : state.gamma();
      Checkpoint cp;
      cp.t = t;
      cp.normalizations = t - 1;
      if (f_eval) cp.f_value = f_eval(out);
      cp.c_avg = constraint_violation(state.gamma_bar(), spec);
      cp.c_iter = constraint_violation(state.gamma(), spec);
      cp.eta = eta_t;
      if (config.record_timing) {
        cp.elapsed_ns =
            std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();
      }
      trace.checkpoints.push_back(cp);
    }
    if (t == config.horizon) break;
    const auto report = state.advance(oracle.gradient(t, state.gamma()), eta_t, config.log_domain_threshold);
    trace.selected_modes.push_back(report.mode);
  }
  trace.output = config.averaging == Averaging::mean ? state.gamma_bar() : state.gamma();
  trace.last_iterate = state.gamma();
  trace.used_log_domain = state.log_domain();
  return trace;
}

std::string format_trace_csv(const TensorRunTrace& trace) {
  RunTrace flat;
  flat.checkpoints = trace.checkpoints;
  return format_trace_csv(flat);
}

}  // namespace mirror_sinkhorn
