#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "mirror_sinkhorn/baselines.hpp"
#include "mirror_sinkhorn/errors.hpp"
#include "mirror_sinkhorn/objectives.hpp"
#include "mirror_sinkhorn/tensor.hpp"

namespace ms = mirror_sinkhorn;

namespace {

ms::Marginal random_marginal(std::size_t size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  ms::Vector w(static_cast<ms::Index>(size));
  for (auto& x : w) x = u(rng);
  return ms::Marginal::from_weights(w);
}

ms::DenseTensor random_tensor(const std::vector<std::size_t>& shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  ms::DenseTensor t(shape);
  for (auto& x : t.data()) x = u(rng);
  return t;
}

// Mode marginal by explicit index decoding, independent of the strides.
std::vector<double> slow_marginal(const ms::DenseTensor& g, std::size_t k) {
  const auto& shape = g.shape();
  std::vector<double> out(shape[k], 0.0);
  std::vector<std::size_t> idx(shape.size(), 0);
  for (;;) {
    out[idx[k]] += g.at(idx);
    std::size_t p = shape.size();
    while (p > 0) {
      --p;
      if (++idx[p] < shape[p]) break;
      idx[p] = 0;
      if (p == 0) return out;
    }
  }
}

double vec_kl(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * std::log(a[i] / b[i]) + b[i] - a[i];
  return s;
}

// min <C, x> over the multimarginal polytope by trying every column subset
// of the constraint matrix whose size equals its rank.
double vertex_search(const ms::DenseTensor& cost, const ms::TensorPolytope& spec) {
  const std::size_t n = cost.size();
  std::vector<std::pair<std::size_t, std::size_t>> rows;
  for (std::size_t k = 0; k < spec.rank(); ++k) {
    for (std::size_t i = 0; i < cost.shape()[k]; ++i) rows.emplace_back(k, i);
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
  Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    b[static_cast<Eigen::Index>(r)] = spec.marginals[rows[r].first][static_cast<Eigen::Index>(rows[r].second)];
    for (std::size_t f = 0; f < n; ++f) {
      if (cost.coordinate(f, rows[r].first) == rows[r].second) a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f)) = 1.0;
    }
  }
  const auto rank = static_cast<std::size_t>(Eigen::FullPivLU<Eigen::MatrixXd>(a).rank());
  double best = std::numeric_limits<double>::infinity();
  std::vector<bool> pick(n, false);
  std::fill(pick.begin(), pick.begin() + static_cast<long>(rank), true);
  do {
    std::vector<Eigen::Index> cols;
    for (std::size_t f = 0; f < n; ++f) {
      if (pick[f]) cols.push_back(static_cast<Eigen::Index>(f));
    }
    Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(rank));
    for (std::size_t c = 0; c < rank; ++c) sub.col(static_cast<Eigen::Index>(c)) = a.col(cols[c]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
    if (static_cast<std::size_t>(lu.rank()) < rank) continue;
    const Eigen::VectorXd x = sub.colPivHouseholderQr().solve(b);
    if ((sub * x - b).cwiseAbs().maxCoeff() > 1e-10 || x.minCoeff() < -1e-12) continue;
    double v = 0.0;
    for (std::size_t c = 0; c < rank; ++c) v += x[static_cast<Eigen::Index>(c)] * cost[static_cast<std::size_t>(cols[c])];
    best = std::min(best, v);
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("dense tensor indexing") {
    ms::DenseTensor t({2, 3, 4});
    const std::array<std::size_t, 3> idx{1, 2, 3};
    t.at(idx) = 5.0;
    CHECK(t[23] == 5.0);
    CHECK(t.coordinate(23, 0) == 1);
    CHECK(t.coordinate(23, 1) == 2);
    CHECK(t.coordinate(23, 2) == 3);
    const std::array<std::size_t, 3> bad{2, 0, 0};
    CHECK_THROWS_AS(t.at(bad), ms::DimensionError);
    const std::array<std::size_t, 2> short_idx{0, 0};
    CHECK_THROWS_AS(t.at(short_idx), ms::DimensionError);
    CHECK_THROWS_AS(ms::DenseTensor({10000, 10000, 2}), ms::SizeLimitError);
    CHECK_THROWS_AS(ms::DenseTensor({3, 0}), ms::DimensionError);
  }

  TEST_CASE("mode marginals") {
    std::mt19937_64 rng(1);
    const ms::TensorPolytope spec{{random_marginal(2, rng), random_marginal(3, rng), random_marginal(4, rng)}};
    const auto prod = ms::independent_coupling(spec);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK((ms::mode_marginal(prod, k) - spec.marginals[k].values()).cwiseAbs().maxCoeff() <= 1e-15);
    }
    CHECK(ms::constraint_violation(prod, spec) <= 1e-15);

    const ms::DenseTensor ones({2, 2, 2}, 1.0);
    for (std::size_t k = 0; k < 3; ++k) CHECK(ms::mode_marginal(ones, k) == ms::Vector::Constant(2, 4.0));

    ms::DenseTensor point({2, 3, 4});
    const std::array<std::size_t, 3> at{1, 0, 2};
    point.at(at) = 0.7;
    CHECK(ms::mode_marginal(point, 0) == (ms::Vector(2) << 0.0, 0.7).finished());
    CHECK(ms::mode_marginal(point, 1) == (ms::Vector(3) << 0.7, 0.0, 0.0).finished());
    CHECK(ms::mode_marginal(point, 2) == (ms::Vector(4) << 0.0, 0.0, 0.7, 0.0).finished());
    CHECK_THROWS_AS(ms::mode_marginal(point, 3), ms::DimensionError);

    const auto r = random_tensor({3, 2, 4, 2}, rng, 0, 1);
    for (std::size_t k = 0; k < 4; ++k) {
      const auto slow = slow_marginal(r, k);
      const auto fast = ms::mode_marginal(r, k);
      for (std::size_t i = 0; i < slow.size(); ++i) CHECK(fast[static_cast<ms::Index>(i)] == doctest::Approx(slow[i]).epsilon(1e-14));
    }
  }

  TEST_CASE("zero gradient leaves the product tensor alone, tie goes to mode 0") {
    std::mt19937_64 rng(2);
    const ms::TensorPolytope spec{{random_marginal(3, rng), random_marginal(2, rng), random_marginal(3, rng)}};
    ms::TensorSolverState s(spec);
    const auto before = s.gamma();
    const auto report = s.advance(ms::DenseTensor(before.shape(), 0.0), 0.5);
    for (double c : report.distances) CHECK(std::abs(c) <= 1e-15);
    for (std::size_t f = 0; f < before.size(); ++f) CHECK(s.gamma()[f] == doctest::Approx(before[f]).epsilon(1e-15));

    // Dyadic uniform marginals make every distance exactly zero.
    const ms::TensorPolytope dyadic{{ms::Marginal::uniform(2), ms::Marginal::uniform(4), ms::Marginal::uniform(2)}};
    ms::TensorSolverState u(dyadic);
    const auto tie = u.advance(ms::DenseTensor(u.gamma().shape(), 0.0), 0.5);
    for (double c : tie.distances) CHECK(c == 0.0);
    CHECK(tie.mode == 0);
  }

  TEST_CASE("row-only gradient selects the row mode") {
    const ms::TensorPolytope spec{{ms::Marginal::from_weights((ms::Vector(3) << 1, 2, 3).finished()),
                                   ms::Marginal::from_weights((ms::Vector(2) << 1, 1).finished())}};
    const std::vector<double> a{0.3, -0.2, 1.0};
    ms::DenseTensor g({3, 2});
    for (std::size_t f = 0; f < g.size(); ++f) g[f] = a[g.coordinate(f, 0)];
    const double eta = 0.8;
    ms::TensorSolverState s(spec);
    const auto report = s.advance(g, eta);
    // By hand: rows become mu_i e^{-eta a_i}; columns become nu_j Z.
    double z = 0.0, mean_a = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      z += spec.marginals[0][static_cast<ms::Index>(i)] * std::exp(-eta * a[i]);
      mean_a += spec.marginals[0][static_cast<ms::Index>(i)] * a[i];
    }
    const double c_rows = eta * mean_a + z - 1.0;
    const double c_cols = -std::log(z) + z - 1.0;
    CHECK(report.distances[0] == doctest::Approx(c_rows).epsilon(1e-12));
    CHECK(report.distances[1] == doctest::Approx(c_cols).epsilon(1e-12));
    CHECK(report.distances[0] > report.distances[1]);
    CHECK(report.mode == 0);
  }

  TEST_CASE("2x2x2 slice step") {
    const ms::TensorPolytope spec{{ms::Marginal::uniform(2), ms::Marginal::uniform(2), ms::Marginal::uniform(2)}};
    ms::DenseTensor g({2, 2, 2});
    for (std::size_t f = 0; f < g.size(); ++f) g[f] = g.coordinate(f, 2) == 1 ? 1.0 : 0.0;
    ms::TensorSolverState s(spec);
    const auto report = s.advance(g, std::log(2.0));
    // gamma' has slices 1/8 and 1/16: S_0 = S_1 = (3/8, 3/8) and S_2 = (1/2, 1/4).
    const double c01 = std::log(4.0 / 3.0) - 0.25;
    const double c2 = 0.5 * std::log(2.0) - 0.25;
    CHECK(report.distances[0] == doctest::Approx(c01).epsilon(1e-13));
    CHECK(report.distances[1] == doctest::Approx(c01).epsilon(1e-13));
    CHECK(report.distances[2] == doctest::Approx(c2).epsilon(1e-13));
    CHECK(report.mode == 2);
    CHECK((ms::mode_marginal(s.gamma(), 2) - spec.marginals[2].values()).cwiseAbs().maxCoeff() <= 1e-15);
  }

  TEST_CASE("random steps: greedy choice, selected mode exact, unit mass") {
    std::mt19937_64 rng(3);
    const ms::TensorPolytope spec{{random_marginal(3, rng), random_marginal(4, rng), random_marginal(2, rng)}};
    ms::TensorSolverState s(spec);
    for (int step = 0; step < 100; ++step) {
      const auto g = random_tensor(s.gamma().shape(), rng, -1, 1);
      // Expected distances from the loop oracle on gamma'.
      ms::DenseTensor prime = s.gamma();
      for (std::size_t f = 0; f < prime.size(); ++f) prime[f] *= std::exp(-0.7 * g[f]);
      std::vector<double> want;
      for (std::size_t k = 0; k < 3; ++k) {
        const auto& mu = spec.marginals[k].values();
        want.push_back(vec_kl({mu.data(), mu.data() + mu.size()}, slow_marginal(prime, k)));
      }
      const auto report = s.advance(g, 0.7);
      for (std::size_t k = 0; k < 3; ++k) {
        CHECK(report.distances[k] == doctest::Approx(want[k]).epsilon(1e-10));
        CHECK(report.distances[report.mode] >= report.distances[k]);
      }
      CHECK((ms::mode_marginal(s.gamma(), report.mode) - spec.marginals[report.mode].values()).lpNorm<1>() <= 1e-10);
      CHECK(std::abs(s.gamma().sum() - 1.0) <= 1e-9);
    }
  }

  TEST_CASE("linear cost: objective gap and constraint bounds against vertex search") {
    for (const std::vector<std::size_t>& shape : {std::vector<std::size_t>{2, 2, 2}, std::vector<std::size_t>{3, 2, 2}}) {
      std::mt19937_64 rng(shape[0] * 7 + 1);
      ms::TensorPolytope spec;
      for (auto mk : shape) spec.marginals.push_back(random_marginal(mk, rng));
      ms::LinearTensorObjective f(random_tensor(shape, rng, 0, 1));
      const double opt = vertex_search(f.cost(), spec);
      double b = 0.0;
      for (double v : f.cost().data()) b = std::max(b, std::abs(v));
      const double delta = ms::entropic_radius(spec).delta;
      ms::SolverConfig cfg;
      cfg.schedule = ms::StepSchedule::anytime_sqrt(b, {delta});
      cfg.horizon = 10000;
      const auto trace = ms::tensor_solve(f, spec, cfg);
      const double T = 1e4;
      const double gap = f.value(trace.output) - opt;
      const double bound = 9.0 * b / 8.0 * std::sqrt(delta / T) * (2.0 + std::log(T));
      MESSAGE("tensor gap " << gap << " bound " << bound);
      CHECK(gap <= bound);
      CHECK(ms::constraint_violation(trace.output, spec) <= 1.5 * std::sqrt(delta / T) * (2.0 + std::log(T)));
      CHECK(trace.selected_modes.size() == 9999);
    }
  }

  TEST_CASE("two modes: tensor and matrix solvers reach the same optimum") {
    std::mt19937_64 rng(5);
    const auto mu = random_marginal(4, rng);
    const auto nu = random_marginal(4, rng);
    const auto cost_t = random_tensor({4, 4}, rng, 0, 1);
    ms::Matrix cost(4, 4);
    for (std::size_t f = 0; f < cost_t.size(); ++f) {
      cost(static_cast<ms::Index>(cost_t.coordinate(f, 0)), static_cast<ms::Index>(cost_t.coordinate(f, 1))) = cost_t[f];
    }
    const ms::TransportPolytope mspec{mu, nu};
    const ms::TensorPolytope tspec{{mu, nu}};
    const double opt = ms::exact_ot_small(cost, mspec).value;

    ms::SolverConfig cfg;
    cfg.schedule = ms::StepSchedule::ot_anytime(ms::entropic_radius(mspec));
    cfg.horizon = 10000;
    ms::LinearTensorObjective ft(cost_t);
    const auto tt = ms::tensor_solve(ft, tspec, cfg);
    const ms::LinearObjective fm(cost);
    ms::ExactOracle oracle(fm);
    const auto mt = ms::solve(oracle, mspec, cfg);
    const double vt = ft.value(tt.output), vm = fm.value(mt.output);
    MESSAGE("tensor " << vt << " matrix " << vm << " exact " << opt);
    CHECK(std::abs(vt - opt) <= 0.01);
    CHECK(std::abs(vm - opt) <= 0.01);
  }
}
