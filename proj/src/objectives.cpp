#include "mirror_sinkhorn/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mirror_sinkhorn {

namespace {

void require_shape(const Matrix& gamma, Index rows, Index cols, const char* what) {
  if (gamma.rows() != rows || gamma.cols() != cols) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                         ", got " + std::to_string(gamma.rows()) + "x" + std::to_string(gamma.cols()));
  }
}

Matrix uniform_noise(Index rows, Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Matrix z(rows, cols);
  // Fill in row-major order so the draw sequence matches the text layout.
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) z(i, j) = unit(rng);
  }
  return z;
}

}  // namespace

LinearObjective::LinearObjective(Matrix cost) : cost_(std::move(cost)) {
  if (!cost_.allFinite()) throw DomainError("cost matrix has non-finite entries");
}

double LinearObjective::value(const Matrix& gamma) const {
  require_shape(gamma, cost_.rows(), cost_.cols(), "linear objective");
  return cost_.cwiseProduct(gamma).sum();
}

Matrix LinearObjective::gradient(const Matrix& gamma) const {
  require_shape(gamma, cost_.rows(), cost_.cols(), "linear objective");
  return cost_;
}

ObjectiveInfo LinearObjective::info() const { return {cost_.cwiseAbs().maxCoeff(), std::nullopt, std::nullopt}; }

EntropicObjective::EntropicObjective(Matrix cost, double alpha) : cost_(std::move(cost)), alpha_(alpha) {
  if (!(alpha_ > 0.0)) throw DomainError("entropic objective requires alpha > 0");
  if (!cost_.allFinite()) throw DomainError("cost matrix has non-finite entries");
}

double EntropicObjective::value(const Matrix& gamma) const {
  require_shape(gamma, cost_.rows(), cost_.cols(), "entropic objective");
  // Summed per entry: near the planted optimum C + alpha log gamma is small
  // and the two halves would otherwise cancel.
  double total = 0.0;
  for (Index k = 0; k < gamma.size(); ++k) {
    const double x = gamma.data()[k];
    if (x < 0.0) throw DomainError("entropic objective: negative entry");
    if (x > 0.0) total += x * (cost_.data()[k] + alpha_ * std::log(x));
  }
  return total;
}

Matrix EntropicObjective::gradient(const Matrix& gamma) const {
  require_shape(gamma, cost_.rows(), cost_.cols(), "entropic objective");
  if (!(gamma.array() > 0.0).all()) throw DomainError("entropic gradient needs strictly positive entries");
  return cost_.array() + alpha_ * (gamma.array().log() + 1.0);
}

ObjectiveInfo EntropicObjective::info() const { return {std::nullopt, alpha_, alpha_}; }

ProcrustesObjective::ProcrustesObjective(Matrix kx, Matrix ky, double lambda)
    : kx_(std::move(kx)), ky_(std::move(ky)), lambda_(lambda) {
  if (kx_.rows() != kx_.cols() || ky_.rows() != ky_.cols()) throw DimensionError("K_X and K_Y must be square");
  if (!(lambda_ >= 0.0)) throw DomainError("procrustes lambda must be >= 0");
}

double ProcrustesObjective::value(const Matrix& gamma) const {
  require_shape(gamma, kx_.rows(), ky_.rows(), "procrustes objective");
  const Matrix residual = kx_ * gamma - gamma * ky_;
  return residual.squaredNorm() - lambda_ * gamma.squaredNorm();
}

Matrix ProcrustesObjective::gradient(const Matrix& gamma) const {
  require_shape(gamma, kx_.rows(), ky_.rows(), "procrustes objective");
  const Matrix residual = kx_ * gamma - gamma * ky_;
  return 2.0 * (kx_.transpose() * residual - residual * ky_.transpose()) - 2.0 * lambda_ * gamma;
}

MarginalRegularizedObjective::MarginalRegularizedObjective(std::shared_ptr<const Objective> base,
                                                           TransportPolytope spec, double weight)
    : base_(std::move(base)), spec_(std::move(spec)), weight_(weight) {
  if (!base_) throw ConfigError("marginal_regularized needs a base objective");
  if (!(weight_ > 0.0)) throw DomainError("marginal regularization weight must be > 0");
}

double MarginalRegularizedObjective::value(const Matrix& gamma) const {
  require_shape(gamma, spec_.m(), spec_.n(), "marginal-regularized objective");
  return base_->value(gamma) + weight_ * (row_sums(gamma) - spec_.rows.values()).squaredNorm() +
         weight_ * (col_sums(gamma) - spec_.cols.values()).squaredNorm();
}

Matrix MarginalRegularizedObjective::gradient(const Matrix& gamma) const {
  require_shape(gamma, spec_.m(), spec_.n(), "marginal-regularized objective");
  const Vector row_term = 2.0 * weight_ * (row_sums(gamma) - spec_.rows.values());
  const Vector col_term = 2.0 * weight_ * (col_sums(gamma) - spec_.cols.values());
  Matrix g = base_->gradient(gamma);
  g.colwise() += row_term;
  g.rowwise() += col_term.transpose();
  return g;
}

LinearObjective linear_objective(Matrix cost) { return LinearObjective(std::move(cost)); }

EntropicObjective entropic_ot_objective(Matrix cost, double alpha) { return EntropicObjective(std::move(cost), alpha); }

ProcrustesObjective procrustes_objective(Matrix kx, Matrix ky, double lambda) {
  return ProcrustesObjective(std::move(kx), std::move(ky), lambda);
}

MarginalRegularizedObjective marginal_regularized(std::shared_ptr<const Objective> base, const TransportPolytope& spec,
                                                  double weight) {
  return MarginalRegularizedObjective(std::move(base), spec, weight);
}

EntropicObjective planted_strongly_convex(const TransportPolytope& spec, const Coupling& gamma_star, double alpha) {
  require_shape(gamma_star, spec.m(), spec.n(), "planted coupling");
  if (!(gamma_star.array() > 0.0).all()) throw DomainError("planted coupling must be strictly positive");
  return EntropicObjective(-alpha * gamma_star.array().log().matrix(), alpha);
}

double estimate_lipschitz(const Objective& f, const TransportPolytope& spec, int samples, std::uint64_t seed) {
  if (samples < 1) throw ConfigError("estimate_lipschitz needs at least one sample");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.5, 1.5);
  double best = 0.0;
  for (int s = 0; s < samples; ++s) {
    Matrix gamma = Matrix::NullaryExpr(spec.m(), spec.n(), [&] { return unit(rng); });
    for (int k = 0; k < 50; ++k) {
      row_normalize_in_place(gamma, spec.rows);
      col_normalize_in_place(gamma, spec.cols);
    }
    best = std::max(best, f.gradient(gamma).cwiseAbs().maxCoeff());
  }
  return best;
}

Matrix ExactOracle::gradient(std::int64_t, const Coupling& gamma) { return f_.gradient(gamma); }

OracleInfo ExactOracle::info() const { return {f_.info().lipschitz, 0.0, true}; }

SubsampledOracle::SubsampledOracle(std::shared_ptr<const Objective> f, Index sample_size, std::uint64_t seed)
    : f_(std::move(f)), sample_size_(sample_size), rng_(seed) {
  if (!f_) throw ConfigError("subsampled oracle needs an objective");
  if (sample_size_ < 1) throw ConfigError("sample size must be >= 1");
}

Matrix SubsampledOracle::gradient(std::int64_t, const Coupling& gamma) {
  const Index cells = gamma.size();
  if (sample_size_ > cells) throw ConfigError("sample size exceeds the number of entries");
  if (static_cast<Index>(cells_.size()) != cells) {
    cells_.resize(static_cast<std::size_t>(cells));
    std::iota(cells_.begin(), cells_.end(), Index{0});
  }
  // Partial Fisher-Yates: the first sample_size_ cells form a uniform subset.
  for (Index k = 0; k < sample_size_; ++k) {
    std::uniform_int_distribution<Index> pick(k, cells - 1);
    std::swap(cells_[static_cast<std::size_t>(k)], cells_[static_cast<std::size_t>(pick(rng_))]);
  }
  const Matrix full = f_->gradient(gamma);
  const double scale = static_cast<double>(cells) / static_cast<double>(sample_size_);
  Matrix g = Matrix::Zero(gamma.rows(), gamma.cols());
  for (Index k = 0; k < sample_size_; ++k) {
    const Index c = cells_[static_cast<std::size_t>(k)];
    g.data()[c] = scale * full.data()[c];
  }
  return g;
}

OracleInfo SubsampledOracle::info() const { return {f_->info().lipschitz, 0.0, false}; }

NoisyOracle::NoisyOracle(std::shared_ptr<const Objective> f, double sigma, std::uint64_t seed)
    : f_(std::move(f)), sigma_(sigma), rng_(seed) {
  if (!f_) throw ConfigError("noisy oracle needs an objective");
  if (!(sigma_ >= 0.0)) throw ConfigError("noise level must be >= 0");
}

Matrix NoisyOracle::gradient(std::int64_t, const Coupling& gamma) {
  Matrix g = f_->gradient(gamma);
  if (sigma_ > 0.0) g += sigma_ * uniform_noise(g.rows(), g.cols(), rng_);
  return g;
}

OracleInfo NoisyOracle::info() const { return {f_->info().lipschitz, sigma_, sigma_ == 0.0}; }

PointSampler uniform_perturbation_sampler(Matrix means, double half_width) {
  return [means = std::move(means), half_width](std::mt19937_64& rng) {
    if (half_width == 0.0) return means;
    std::uniform_real_distribution<double> unit(-half_width, half_width);
    Matrix out = means;
    for (Index i = 0; i < out.rows(); ++i) {
      for (Index j = 0; j < out.cols(); ++j) out(i, j) += unit(rng);
    }
    return out;
  };
}

InnerProductCostOracle::InnerProductCostOracle(PointSampler x, PointSampler y, std::uint64_t seed,
                                               double declared_sigma)
    : x_(std::move(x)), y_(std::move(y)), rng_(seed), sigma_(declared_sigma) {
  if (!x_ || !y_) throw ConfigError("inner-product oracle needs two samplers");
}

Matrix InnerProductCostOracle::gradient(std::int64_t, const Coupling& gamma) {
  const Matrix xs = x_(rng_);
  const Matrix ys = y_(rng_);
  if (xs.cols() != ys.cols()) throw OracleError("point families live in different dimensions");
  Matrix g = -(xs * ys.transpose());
  if (g.rows() != gamma.rows() || g.cols() != gamma.cols()) throw OracleError("sampled cost has the wrong shape");
  return g;
}

OracleInfo InnerProductCostOracle::info() const { return {std::nullopt, sigma_, sigma_ == 0.0}; }

NoisyLinearLossStream::NoisyLinearLossStream(Matrix mean_cost, double sigma, std::uint64_t seed)
    : mean_(std::move(mean_cost)),
      sigma_(sigma),
      rng_(seed),
      current_(mean_),
      cumulative_(Matrix::Zero(mean_.rows(), mean_.cols())) {
  if (!(sigma_ >= 0.0)) throw ConfigError("noise level must be >= 0");
}

const Objective& NoisyLinearLossStream::loss(std::int64_t t) {
  if (t == last_t_ && t > 0) return current_;
  if (t != last_t_ + 1) throw ConfigError("loss stream must be consumed in order");
  Matrix cost = mean_;
  if (sigma_ > 0.0) cost += sigma_ * uniform_noise(mean_.rows(), mean_.cols(), rng_);
  cumulative_ += cost;
  current_ = LinearObjective(std::move(cost));
  last_t_ = t;
  return current_;
}

double NoisyLinearLossStream::lipschitz_bound() const { return mean_.cwiseAbs().maxCoeff() + sigma_; }

AlternatingLinearLossStream::AlternatingLinearLossStream(Matrix cost) : plus_(cost), minus_(-cost) {}

const Objective& AlternatingLinearLossStream::loss(std::int64_t t) { return t % 2 == 1 ? plus_ : minus_; }

}  // namespace mirror_sinkhorn
