#pragma once

#include "mirror_sinkhorn/transport.hpp"

namespace mirror_sinkhorn {

// Below this l1 norm the row residual is treated as zero and the rank-one
// correction is skipped.
inline constexpr double kRoundingResidualFloor = 1e-15;

// Maps a nonnegative matrix into T(mu, nu):
//
//   gamma'  = Diag(min(mu / (gamma 1), 1)) gamma
//   gamma'' = gamma' Diag(min(nu / (gamma'^T 1), 1))
//   out     = gamma'' + (mu - gamma'' 1)(nu - gamma''^T 1)^T / ||mu - gamma'' 1||_1
//
// with ||out - gamma||_1 <= 2 c(gamma). Runs in O(mn). A row (column)
// with zero sum is left at zero by the capped scaling and filled by the
// rank-one term. Throws DomainError on negative entries or an all-zero
// input.
Coupling round_to_polytope(const Matrix& gamma, const TransportPolytope& spec);

}  // namespace mirror_sinkhorn
