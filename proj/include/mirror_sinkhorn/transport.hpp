#pragma once

// Domain types and entrywise primitives on transport polytopes:
// marginals, couplings, relative entropy, constraint violation and the
// row/column scalings used by every solver in the library.

#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "mirror_sinkhorn/errors.hpp"

namespace mirror_sinkhorn {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// A coupling is a nonnegative m x n matrix. Solver iterates are strictly
// positive with unit total mass.
using Coupling = Matrix;

// Strictly positive probability vector.
class Marginal {
 public:
  // Tolerance on |sum - 1| accepted at construction.
  static constexpr double kSumTolerance = 1e-12;

  // Throws DomainError if an entry is not > 0 or the sum is off by more
  // than kSumTolerance. Accepted values are divided by their sum.
  explicit Marginal(Vector values);

  // Normalizes arbitrary positive weights.
  static Marginal from_weights(const Vector& weights);
  static Marginal uniform(Index size);

  const Vector& values() const { return values_; }
  Index size() const { return values_.size(); }
  double operator[](Index i) const { return values_[i]; }

  // ||log mu||_inf
  double log_radius() const;

 private:
  Vector values_;
};

// The polytope T(mu, nu) of m x n couplings with row sums mu and column
// sums nu.
struct TransportPolytope {
  Marginal rows;
  Marginal cols;

  Index m() const { return rows.size(); }
  Index n() const { return cols.size(); }
};

// delta = ||log mu||_inf + ||log nu||_inf; calibrates step sizes.
struct EntropicRadius {
  double delta = 0.0;
};

Vector row_sums(const Matrix& gamma);
Vector col_sums(const Matrix& gamma);

// mu nu^T
Coupling independent_coupling(const TransportPolytope& spec);

// ||gamma 1 - mu||_1 + ||gamma^T 1 - nu||_1
double constraint_violation(const Matrix& gamma, const TransportPolytope& spec);

// Marginal residuals taken separately: {||gamma 1 - mu||_1, ||gamma^T 1 - nu||_1}.
struct MarginalResiduals {
  double rows = 0.0;
  double cols = 0.0;
};
MarginalResiduals marginal_residuals(const Matrix& gamma, const TransportPolytope& spec);

EntropicRadius entropic_radius(const TransportPolytope& spec);

// Generalized relative entropy <a, log a - log b> + <b - a, 1> with
// 0 log 0 = 0. Throws DomainError when b has a zero where a is positive,
// or when a has a negative entry.
double kl_divergence(std::span<const double> a, std::span<const double> b);
double kl_divergence(const Matrix& a, const Matrix& b);
double kl_divergence(const Vector& a, const Vector& b);

// <gamma, log gamma> with 0 log 0 = 0.
double negative_entropy(const Matrix& gamma);

// Diag(mu / (gamma 1)) gamma. Throws DegenerateIterateError on a row sum
// that is not strictly positive and finite.
Coupling row_normalize(const Matrix& gamma, const Marginal& mu);
// gamma Diag(nu / (gamma^T 1)).
Coupling col_normalize(const Matrix& gamma, const Marginal& nu);

void row_normalize_in_place(Matrix& gamma, const Marginal& mu);
void col_normalize_in_place(Matrix& gamma, const Marginal& nu);

// Same scalings applied to entrywise logarithms: subtracts the row (or
// column) log-sum-exp and adds log mu (or log nu).
void row_normalize_log(Matrix& log_gamma, const Marginal& mu);
void col_normalize_log(Matrix& log_gamma, const Marginal& nu);

// log(sum(exp(x))) computed stably; -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> x);

}  // namespace mirror_sinkhorn
