#pragma once

// Convex objectives on couplings and the gradient oracles built from them.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>

#include "mirror_sinkhorn/solver.hpp"
#include "mirror_sinkhorn/transport.hpp"

namespace mirror_sinkhorn {

struct ObjectiveInfo {
  std::optional<double> lipschitz;         // B w.r.t. ||.||_1
  std::optional<double> strong_convexity;  // ell w.r.t. relative entropy
  std::optional<double> smoothness;        // L w.r.t. relative entropy
};

class Objective {
 public:
  virtual ~Objective() = default;
  virtual double value(const Matrix& gamma) const = 0;
  virtual Matrix gradient(const Matrix& gamma) const = 0;
  virtual ObjectiveInfo info() const = 0;
};

// <C, gamma>; B = ||C||_inf.
class LinearObjective final : public Objective {
 public:
  explicit LinearObjective(Matrix cost);
  double value(const Matrix& gamma) const override;
  Matrix gradient(const Matrix& gamma) const override;
  ObjectiveInfo info() const override;
  const Matrix& cost() const { return cost_; }

 private:
  Matrix cost_;
};

// <C, gamma> + alpha <gamma, log gamma>; ell = L = alpha.
class EntropicObjective final : public Objective {
 public:
  EntropicObjective(Matrix cost, double alpha);
  double value(const Matrix& gamma) const override;
  // C + alpha (log gamma + 1); DomainError on a non-positive entry.
  Matrix gradient(const Matrix& gamma) const override;
  ObjectiveInfo info() const override;
  const Matrix& cost() const { return cost_; }
  double alpha() const { return alpha_; }

 private:
  Matrix cost_;
  double alpha_;
};

// ||K_X gamma - gamma K_Y||_F^2 - lambda ||gamma||_F^2. Convex on the
// polytope only for lambda small relative to the spectra of K_X and K_Y.
class ProcrustesObjective final : public Objective {
 public:
  ProcrustesObjective(Matrix kx, Matrix ky, double lambda);
  double value(const Matrix& gamma) const override;
  Matrix gradient(const Matrix& gamma) const override;
  ObjectiveInfo info() const override { return {}; }

 private:
  Matrix kx_;
  Matrix ky_;
  double lambda_;
};

// f(gamma) + w ||gamma 1 - mu||^2 + w ||gamma^T 1 - nu||^2. Both penalty
// gradients vanish exactly on the matching affine constraint, so Mirror
// Sinkhorn produces the same iterates with or without them.
class MarginalRegularizedObjective final : public Objective {
 public:
  MarginalRegularizedObjective(std::shared_ptr<const Objective> base, TransportPolytope spec, double weight);
  double value(const Matrix& gamma) const override;
  Matrix gradient(const Matrix& gamma) const override;
  ObjectiveInfo info() const override { return base_->info(); }

 private:
  std::shared_ptr<const Objective> base_;
  TransportPolytope spec_;
  double weight_;
};

LinearObjective linear_objective(Matrix cost);
EntropicObjective entropic_ot_objective(Matrix cost, double alpha);
ProcrustesObjective procrustes_objective(Matrix kx, Matrix ky, double lambda);
MarginalRegularizedObjective marginal_regularized(std::shared_ptr<const Objective> base, const TransportPolytope& spec,
                                                  double weight);

// Entropic objective with cost -alpha log gamma_star; its minimizer over
// T(mu, nu) is gamma_star and f(gamma_star) = 0. gamma_star must be
// strictly positive.
EntropicObjective planted_strongly_convex(const TransportPolytope& spec, const Coupling& gamma_star, double alpha);

// Largest ||grad f||_inf seen at `samples` random interior couplings of
// the polytope (a lower estimate of B).
double estimate_lipschitz(const Objective& f, const TransportPolytope& spec, int samples, std::uint64_t seed);

// grad f(gamma_t), exactly. Does not own the objective.
class ExactOracle final : public GradientOracle {
 public:
  explicit ExactOracle(const Objective& f) : f_(f) {}
  Matrix gradient(std::int64_t t, const Coupling& gamma) override;
  OracleInfo info() const override;

 private:
  const Objective& f_;
};

// (mn / |S|) sum_{(i,j) in S} (grad f)_ij e_ij over a uniformly drawn set
// S of `sample_size` distinct entries.
class SubsampledOracle final : public GradientOracle {
 public:
  SubsampledOracle(std::shared_ptr<const Objective> f, Index sample_size, std::uint64_t seed);
  Matrix gradient(std::int64_t t, const Coupling& gamma) override;
  OracleInfo info() const override;

 private:
  std::shared_ptr<const Objective> f_;
  Index sample_size_;
  std::mt19937_64 rng_;
  std::vector<Index> cells_;
};

// grad f + sigma Z with Z entrywise uniform on [-1, 1], so that
// E||g - grad f||_inf^2 <= sigma^2.
class NoisyOracle final : public GradientOracle {
 public:
  NoisyOracle(std::shared_ptr<const Objective> f, double sigma, std::uint64_t seed);
  Matrix gradient(std::int64_t t, const Coupling& gamma) override;
  OracleInfo info() const override;

 private:
  std::shared_ptr<const Objective> f_;
  double sigma_;
  std::mt19937_64 rng_;
};

// Draws one family of points as the rows of a matrix.
using PointSampler = std::function<Matrix(std::mt19937_64&)>;

// Isotropic perturbation of fixed means: rows of `means` plus entrywise
// uniform noise on [-half_width, half_width].
PointSampler uniform_perturbation_sampler(Matrix means, double half_width);

// g_ij = -<X_i, Y_j> with fresh, independent draws of X and Y per call.
// Unbiased for C_ij = -<x_i, y_j>. Sharing one noise draw between X and Y
// would bias the estimate; the two samplers must be independent.
class InnerProductCostOracle final : public GradientOracle {
 public:
  InnerProductCostOracle(PointSampler x, PointSampler y, std::uint64_t seed, double declared_sigma = 0.0);
  Matrix gradient(std::int64_t t, const Coupling& gamma) override;
  OracleInfo info() const override;

 private:
  PointSampler x_;
  PointSampler y_;
  std::mt19937_64 rng_;
  double sigma_;
};

// Same objective at every step.
class ConstantLossStream final : public LossStream {
 public:
  explicit ConstantLossStream(const Objective& f) : f_(f) {}
  const Objective& loss(std::int64_t) override { return f_; }

 private:
  const Objective& f_;
};

// Linear losses <C_t, .> with C_t = C + sigma Z_t, Z_t entrywise uniform on
// [-1, 1]. Keeps the running sum of the revealed costs so that the best
// fixed coupling in hindsight can be computed.
class NoisyLinearLossStream final : public LossStream {
 public:
  NoisyLinearLossStream(Matrix mean_cost, double sigma, std::uint64_t seed);
  const Objective& loss(std::int64_t t) override;
  const Matrix& cumulative_cost() const { return cumulative_; }
  // Upper bound on ||C_t||_inf for every t.
  double lipschitz_bound() const;

 private:
  Matrix mean_;
  double sigma_;
  std::mt19937_64 rng_;
  std::int64_t last_t_ = 0;
  LinearObjective current_;
  Matrix cumulative_;
};

// Alternates <C, .> and <-C, .> (adversarial sign flips).
class AlternatingLinearLossStream final : public LossStream {
 public:
  explicit AlternatingLinearLossStream(Matrix cost);
  const Objective& loss(std::int64_t t) override;

 private:
  LinearObjective plus_;
  LinearObjective minus_;
};

}  // namespace mirror_sinkhorn
