#include "mirror_sinkhorn/rounding.hpp"

#include <algorithm>
#include <string>

namespace mirror_sinkhorn {

namespace {

// min(target / sum, 1); an empty line keeps factor 1.
Vector capped_factors(const Vector& target, const Vector& sums) {
  Vector f(target.size());
  for (Index i = 0; i < target.size(); ++i) f[i] = sums[i] > 0.0 ? std::min(target[i] / sums[i], 1.0) : 1.0;
  return f;
}

}  // namespace

Coupling round_to_polytope(const Matrix& gamma, const TransportPolytope& spec) {
  if (gamma.rows() != spec.m() || gamma.cols() != spec.n()) {
    throw DimensionError("round_to_polytope: coupling is " + std::to_string(gamma.rows()) + "x" +
                         std::to_string(gamma.cols()) + ", marginals are " + std::to_string(spec.m()) + "x" +
                         std::to_string(spec.n()));
  }
  if (!gamma.allFinite() || (gamma.array() < 0.0).any()) {
    throw DomainError("round_to_polytope: input must be finite and nonnegative");
  }
  if (!(gamma.maxCoeff() > 0.0)) throw DomainError("round_to_polytope: input is all zero");

  Coupling out = capped_factors(spec.rows.values(), row_sums(gamma)).asDiagonal() * gamma;
  out = out * capped_factors(spec.cols.values(), col_sums(out)).asDiagonal();

  // Nonnegative in exact arithmetic; clamp away rounding noise.
  const Vector row_residual = (spec.rows.values() - row_sums(out)).cwiseMax(0.0);
  const Vector col_residual = (spec.cols.values() - col_sums(out)).cwiseMax(0.0);
  const double norm = row_residual.lpNorm<1>();
  if (norm > kRoundingResidualFloor) out.noalias() += (row_residual / norm) * col_residual.transpose();
  return out;
}

}  // namespace mirror_sinkhorn
