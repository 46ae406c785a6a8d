#include "mirror_sinkhorn/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace mirror_sinkhorn {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
  }
}

void require_polytope_shape(const Matrix& gamma, const TransportPolytope& spec, const char* what) {
  if (gamma.rows() != spec.m() || gamma.cols() != spec.n()) {
    throw DimensionError(std::string(what) + ": coupling is " + std::to_string(gamma.rows()) + "x" +
                         std::to_string(gamma.cols()) + ", marginals are " + std::to_string(spec.m()) +
                         "x" + std::to_string(spec.n()));
  }
}

bool usable_scale(double sum) { return sum > 0.0 && std::isfinite(sum); }

}  // namespace

Marginal::Marginal(Vector values) : values_(std::move(values)) {
  if (values_.size() == 0) throw DomainError("marginal must have at least one entry");
  for (Index i = 0; i < values_.size(); ++i) {
    if (!(values_[i] > 0.0) || !std::isfinite(values_[i])) {
      throw DomainError("marginal entry " + std::to_string(i) + " is not strictly positive");
    }
  }
  const double total = values_.sum();
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw DomainError("marginal entries sum to " + std::to_string(total) + ", expected 1");
  }
  values_ /= total;
}

Marginal Marginal::from_weights(const Vector& weights) {
  if (weights.size() == 0) throw DomainError("marginal must have at least one entry");
  if ((weights.array() <= 0.0).any() || !weights.allFinite()) {
    throw DomainError("marginal weights must be finite and strictly positive");
  }
  Vector v = weights / weights.sum();
  // One more division absorbs the rounding of the first.
  v /= v.sum();
  return Marginal(std::move(v));
}

Marginal Marginal::uniform(Index size) {
  if (size < 1) throw DomainError("marginal must have at least one entry");
  return Marginal(Vector::Constant(size, 1.0 / static_cast<double>(size)));
}

double Marginal::log_radius() const { return values_.array().log().abs().maxCoeff(); }

Vector row_sums(const Matrix& gamma) { return gamma.rowwise().sum(); }

Vector col_sums(const Matrix& gamma) { return gamma.colwise().sum().transpose(); }

Coupling independent_coupling(const TransportPolytope& spec) {
  return spec.rows.values() * spec.cols.values().transpose();
}

MarginalResiduals marginal_residuals(const Matrix& gamma, const TransportPolytope& spec) {
  require_polytope_shape(gamma, spec, "marginal_residuals");
  return {(row_sums(gamma) - spec.rows.values()).lpNorm<1>(),
          (col_sums(gamma) - spec.cols.values()).lpNorm<1>()};
}

double constraint_violation(const Matrix& gamma, const TransportPolytope& spec) {
  const auto r = marginal_residuals(gamma, spec);
  return r.rows + r.cols;
}

EntropicRadius entropic_radius(const TransportPolytope& spec) {
  return {spec.rows.log_radius() + spec.cols.log_radius()};
}

double kl_divergence(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("kl_divergence: size mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double x = a[k];
    const double y = b[k];
    if (x < 0.0 || y < 0.0) throw DomainError("kl_divergence: negative entry");
    if (x > 0.0) {
      if (y == 0.0) throw DomainError("kl_divergence: second argument vanishes where the first does not");
      total += x * (std::log(x) - std::log(y));
    }
    total += y - x;
  }
  return total;
}

double kl_divergence(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "kl_divergence");
  return kl_divergence(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                       std::span<const double>(b.data(), static_cast<std::size_t>(b.size())));
}

double kl_divergence(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionError("kl_divergence: size mismatch");
  return kl_divergence(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                       std::span<const double>(b.data(), static_cast<std::size_t>(b.size())));
}

double negative_entropy(const Matrix& gamma) {
  double total = 0.0;
  for (Index k = 0; k < gamma.size(); ++k) {
    const double x = gamma.data()[k];
    if (x < 0.0) throw DomainError("negative_entropy: negative entry");
    if (x > 0.0) total += x * std::log(x);
  }
  return total;
}

void row_normalize_in_place(Matrix& gamma, const Marginal& mu) {
  if (gamma.rows() != mu.size()) throw DimensionError("row_normalize: row count differs from marginal size");
  const Vector sums = row_sums(gamma);
  for (Index i = 0; i < gamma.rows(); ++i) {
    if (!usable_scale(sums[i])) {
      throw DegenerateIterateError("row " + std::to_string(i) + " has non-positive or non-finite sum");
    }
  }
  gamma = (mu.values().array() / sums.array()).matrix().asDiagonal() * gamma;
}

void col_normalize_in_place(Matrix& gamma, const Marginal& nu) {
  if (gamma.cols() != nu.size()) throw DimensionError("col_normalize: column count differs from marginal size");
  const Vector sums = col_sums(gamma);
  for (Index j = 0; j < gamma.cols(); ++j) {
    if (!usable_scale(sums[j])) {
      throw DegenerateIterateError("column " + std::to_string(j) + " has non-positive or non-finite sum");
    }
  }
  gamma = gamma * (nu.values().array() / sums.array()).matrix().asDiagonal();
}

Coupling row_normalize(const Matrix& gamma, const Marginal& mu) {
  Coupling out = gamma;
  row_normalize_in_place(out, mu);
  return out;
}

Coupling col_normalize(const Matrix& gamma, const Marginal& nu) {
  Coupling out = gamma;
  col_normalize_in_place(out, nu);
  return out;
}

double log_sum_exp(std::span<const double> x) {
  double peak = -std::numeric_limits<double>::infinity();
  for (double v : x) peak = std::max(peak, v);
  if (!std::isfinite(peak)) return peak;
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - peak);
  return peak + std::log(acc);
}

void row_normalize_log(Matrix& log_gamma, const Marginal& mu) {
  if (log_gamma.rows() != mu.size()) throw DimensionError("row_normalize_log: row count differs from marginal size");
  std::vector<double> row(static_cast<std::size_t>(log_gamma.cols()));
  for (Index i = 0; i < log_gamma.rows(); ++i) {
    for (Index j = 0; j < log_gamma.cols(); ++j) row[static_cast<std::size_t>(j)] = log_gamma(i, j);
    const double lse = log_sum_exp(row);
    if (!std::isfinite(lse)) throw DegenerateIterateError("row " + std::to_string(i) + " vanished in log domain");
    log_gamma.row(i).array() += std::log(mu[i]) - lse;
  }
}

void col_normalize_log(Matrix& log_gamma, const Marginal& nu) {
  if (log_gamma.cols() != nu.size()) throw DimensionError("col_normalize_log: column count differs from marginal size");
  for (Index j = 0; j < log_gamma.cols(); ++j) {
    // Columns are contiguous in column-major storage.
    const double lse =
        log_sum_exp(std::span<const double>(log_gamma.col(j).data(), static_cast<std::size_t>(log_gamma.rows())));
    if (!std::isfinite(lse)) throw DegenerateIterateError("column " + std::to_string(j) + " vanished in log domain");
    log_gamma.col(j).array() += std::log(nu[j]) - lse;
  }
}

}  // namespace mirror_sinkhorn
