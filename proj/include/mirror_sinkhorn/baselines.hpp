#pragma once

// Comparators for the solver: entropic Sinkhorn, and exact optimal
// transport on small instances.

#include <cstdint>

#include "mirror_sinkhorn/solver.hpp"
#include "mirror_sinkhorn/transport.hpp"

namespace mirror_sinkhorn {

struct SinkhornOptions {
  double log_domain_threshold = 30.0;
  std::int64_t checkpoint_stride = 0;  // 0: powers of two plus the last iteration
};

// Alternating scalings of exp(-C / alpha): odd iterations fix the rows,
// even ones the columns. Checkpoint t holds <C, gamma_t> and c(gamma_t)
// after t scalings; output and last_iterate are both gamma_T. Stored as
// logs when max|C| / alpha exceeds the threshold.
RunTrace sinkhorn(const Matrix& cost, double alpha, const TransportPolytope& spec, std::int64_t iterations,
                  const SinkhornOptions& options = {});

struct ExactTransport {
  double value = 0.0;
  Coupling plan;
};

// Transportation simplex: north-west corner start, potentials for the
// reduced costs, Bland's rule for entering and leaving cells. No size
// guard; cost grows like (iterations) x m n.
ExactTransport transport_simplex(const Matrix& cost, const TransportPolytope& spec);

// Every spanning tree of the bipartite support graph is tried as a basis.
// Refuses mn > 16 with SizeLimitError.
ExactTransport exact_ot_enumerate(const Matrix& cost, const TransportPolytope& spec);

// transport_simplex behind a guard of mn <= 64, falling back to
// enumeration when the simplex stalls on a tiny instance.
ExactTransport exact_ot_small(const Matrix& cost, const TransportPolytope& spec);

}  // namespace mirror_sinkhorn
