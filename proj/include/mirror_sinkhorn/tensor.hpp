#pragma once

// Multimarginal (tensor) Mirror Sinkhorn. Each step takes the multiplicative
// gradient step, then rescales the single mode whose marginal is furthest
// in relative entropy from its target.

#include <cstdint>
#include <span>
#include <vector>

#include "mirror_sinkhorn/solver.hpp"
#include "mirror_sinkhorn/transport.hpp"

namespace mirror_sinkhorn {

// Dense row-major tensor with d >= 1 modes.
class DenseTensor {
 public:
  // Entries beyond this count are refused.
  static constexpr std::size_t kMaxEntries = 100'000'000;

  DenseTensor() = default;
  explicit DenseTensor(std::vector<std::size_t> shape, double fill = 0.0);

  // Outer product v_1 x ... x v_d.
  static DenseTensor outer(const std::vector<Vector>& factors);

  std::size_t rank() const { return shape_.size(); }
  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t flat) { return data_[flat]; }
  double operator[](std::size_t flat) const { return data_[flat]; }

  double& at(std::span<const std::size_t> index);
  double at(std::span<const std::size_t> index) const;

  // Distance between consecutive indices along mode k in flat storage.
  std::size_t stride(std::size_t k) const { return strides_[k]; }
  // Index along mode k of a flat position.
  std::size_t coordinate(std::size_t flat, std::size_t k) const { return (flat / strides_[k]) % shape_[k]; }

  double sum() const;
  bool same_shape(const DenseTensor& other) const { return shape_ == other.shape_; }

 private:
  std::size_t flat_index(std::span<const std::size_t> index) const;

  std::vector<std::size_t> shape_;
  std::vector<std::size_t> strides_;
  std::vector<double> data_;
};

struct TensorPolytope {
  std::vector<Marginal> marginals;

  std::size_t rank() const { return marginals.size(); }
  std::vector<std::size_t> shape() const;
};

// sum_k ||log mu_k||_inf
EntropicRadius entropic_radius(const TensorPolytope& spec);

// mu_1 x ... x mu_d
DenseTensor independent_coupling(const TensorPolytope& spec);

// S_k(gamma): sum over every mode but k (0-based). Throws DimensionError
// for k out of range.
Vector mode_marginal(const DenseTensor& gamma, std::size_t k);

// sum_k ||S_k(gamma) - mu_k||_1
double constraint_violation(const DenseTensor& gamma, const TensorPolytope& spec);

class TensorGradientOracle {
 public:
  virtual ~TensorGradientOracle() = default;
  virtual DenseTensor gradient(std::int64_t t, const DenseTensor& gamma) = 0;
  virtual OracleInfo info() const = 0;
};

// <C, gamma> on tensors; B = ||C||_inf.
class LinearTensorObjective final : public TensorGradientOracle {
 public:
  explicit LinearTensorObjective(DenseTensor cost);
  double value(const DenseTensor& gamma) const;
  DenseTensor gradient(std::int64_t t, const DenseTensor& gamma) override;
  OracleInfo info() const override;
  const DenseTensor& cost() const { return cost_; }

 private:
  DenseTensor cost_;
};

struct TensorStepReport {
  std::size_t mode = 0;           // K, the normalized mode
  std::vector<double> distances;  // c_k = D_KL(mu_k, S_k(gamma')) per mode
};

class TensorSolverState {
 public:
  // t = 1, gamma = gamma_bar = product of the marginals.
  explicit TensorSolverState(TensorPolytope spec);

  std::int64_t t() const { return t_; }
  const DenseTensor& gamma() const { return gamma_; }
  const DenseTensor& gamma_bar() const { return gamma_bar_; }
  const TensorPolytope& spec() const { return spec_; }
  bool log_domain() const { return log_domain_; }

  // Ties in the greedy mode choice go to the smallest mode index.
  TensorStepReport advance(const DenseTensor& gradient, double eta, double log_domain_threshold = 30.0);

 private:
  TensorPolytope spec_;
  std::int64_t t_ = 1;
  DenseTensor gamma_;
  DenseTensor gamma_bar_;
  DenseTensor log_gamma_;
  bool log_domain_ = false;
};

struct TensorRunTrace {
  std::vector<Checkpoint> checkpoints;  // c_avg, c_iter use the tensor violation
  DenseTensor output;
  DenseTensor last_iterate;
  std::vector<std::size_t> selected_modes;  // K chosen at each step
  bool used_log_domain = false;
};

using TensorObjectiveEvaluator = std::function<double(const DenseTensor&)>;

TensorRunTrace tensor_solve(TensorGradientOracle& oracle, const TensorPolytope& spec, const SolverConfig& config,
                            const TensorObjectiveEvaluator& f_eval = {});

std::string format_trace_csv(const TensorRunTrace& trace);

}  // namespace mirror_sinkhorn
