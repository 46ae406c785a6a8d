#include <doctest.h>

#include <random>

#include "mirror_sinkhorn/errors.hpp"
#include "mirror_sinkhorn/rounding.hpp"
#include "oracles.hpp"

namespace ms = mirror_sinkhorn;

TEST_SUITE("rounding") {
  TEST_CASE("feasible input is a fixed point") {
    std::mt19937_64 rng(1);
    const std::vector<double> mu{0.2, 0.3, 0.5}, nu{0.6, 0.4};
    const ms::TransportPolytope spec{ms::Marginal(ms::Vector::Map(mu.data(), 3)),
                                     ms::Marginal(ms::Vector::Map(nu.data(), 2))};
    const auto g = oracle::to_matrix(oracle::random_feasible(mu, nu, rng));
    CHECK((ms::round_to_polytope(g, spec) - g).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("hand-checked 2x2") {
    const ms::TransportPolytope spec{ms::Marginal::uniform(2), ms::Marginal::uniform(2)};
    ms::Matrix g(2, 2);
    g << 0.5, 0.1, 0.1, 0.5;
    // Rows sum to 0.6, so both are scaled by 5/6; the columns then sum to
    // 1/2 exactly and nothing is left for the rank-one term.
    ms::Matrix want(2, 2);
    want << 5.0 / 12, 1.0 / 12, 1.0 / 12, 5.0 / 12;
    const auto r = ms::round_to_polytope(g, spec);
    CHECK((r - want).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(ms::constraint_violation(r, spec) <= 1e-15);
    CHECK((r - g).cwiseAbs().sum() <= 2.0 * ms::constraint_violation(g, spec));
  }

  TEST_CASE("scaled product coupling gets the missing mass back as a product") {
    const ms::TransportPolytope spec{ms::Marginal::from_weights(ms::Vector::LinSpaced(3, 1, 3)),
                                     ms::Marginal::from_weights(ms::Vector::LinSpaced(4, 2, 5))};
    const ms::Matrix p = ms::independent_coupling(spec);
    const auto r = ms::round_to_polytope(0.9 * p, spec);
    // Residuals are 0.1 mu and 0.1 nu, so the fill is (0.1 mu)(0.1 nu)^T / 0.1.
    CHECK((r - p).cwiseAbs().maxCoeff() <= 1e-15);
  }

  TEST_CASE("zero rows and columns are filled") {
    const ms::TransportPolytope spec{ms::Marginal::uniform(3), ms::Marginal::uniform(2)};
    ms::Matrix g = ms::Matrix::Zero(3, 2);
    g(0, 0) = 2.0;
    const auto r = ms::round_to_polytope(g, spec);
    CHECK(ms::constraint_violation(r, spec) <= 1e-15);
    CHECK(r.minCoeff() >= 0.0);
    CHECK_THROWS_AS(ms::round_to_polytope(ms::Matrix::Zero(3, 2), spec), ms::DomainError);
    g(1, 1) = -1.0;
    CHECK_THROWS_AS(ms::round_to_polytope(g, spec), ms::DomainError);
    CHECK_THROWS_AS(ms::round_to_polytope(ms::Matrix::Ones(2, 2), spec), ms::DimensionError);
  }

  TEST_CASE("random inputs: contract, oracle agreement, monotone scalings") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> dim(1, 7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 300; ++rep) {
      const int m = dim(rng), n = dim(rng);
      ms::Vector a(m), b(n);
      for (auto& x : a) x = 0.05 + u(rng);
      for (auto& x : b) x = 0.05 + u(rng);
      const ms::TransportPolytope spec{ms::Marginal::from_weights(a), ms::Marginal::from_weights(b)};
      ms::Matrix g(m, n);
      const double scale = std::pow(10.0, 2.0 * u(rng) - 1.0);
      for (ms::Index i = 0; i < m; ++i) {
        for (ms::Index j = 0; j < n; ++j) g(i, j) = u(rng) < 0.2 ? 0.0 : scale * u(rng);
      }
      if (g.sum() == 0.0) g(0, 0) = 1.0;
      const auto r = ms::round_to_polytope(g, spec);
      const auto mu = oracle::to_vec(spec.rows.values());
      const auto nu = oracle::to_vec(spec.cols.values());
      const auto ref = oracle::round(oracle::to_grid(g), mu, nu);
      CHECK((r - oracle::to_matrix(ref)).cwiseAbs().maxCoeff() <= 1e-14 * std::max(1.0, scale));
      CHECK(oracle::violation(oracle::to_grid(r), mu, nu) <= 1e-10);
      CHECK((r - g).cwiseAbs().sum() <= 2.0 * ms::constraint_violation(g, spec) + 1e-9);
      CHECK((ms::round_to_polytope(r, spec) - r).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK(r.minCoeff() >= 0.0);
    }
  }
}
