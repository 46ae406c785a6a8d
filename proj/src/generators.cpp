#include "mirror_sinkhorn/generators.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <string>

#include "mirror_sinkhorn/stats.hpp"

namespace mirror_sinkhorn {

Marginal random_marginal(Index size, std::mt19937_64& rng) {
  if (size < 1) throw ConfigError("marginal size must be >= 1");
  std::gamma_distribution<double> draw(1.0, 1.0);
  const double floor = 1e-3 / static_cast<double>(size);
  while (true) {
    Vector w(size);
    for (Index i = 0; i < size; ++i) w[i] = draw(rng);
    const double total = w.sum();
    if (total > 0.0 && (w / total).minCoeff() >= floor) return Marginal::from_weights(w);
  }
}

OtInstance gen_ot_synthetic(Index m, Index n, std::uint64_t seed) {
  if (m < 1 || n < 1) throw ConfigError("problem sizes must be >= 1");
  if (m != n) throw ConfigError("ot-synthetic needs m == n for its zero-diagonal construction");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix cost(m, n);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) cost(i, j) = i == j ? 0.0 : unit(rng);
  }
  Marginal mu = random_marginal(m, rng);
  return {std::move(cost), TransportPolytope{mu, mu}};
}

namespace {

Matrix square_image(Index size, std::mt19937_64& rng) {
  Matrix image = Matrix::Constant(size, size, 0.1);
  std::uniform_int_distribution<Index> side_draw(1, std::max<Index>(1, size / 2));
  const Index side = side_draw(rng);
  std::uniform_int_distribution<Index> pos_draw(0, size - side);
  const Index top = pos_draw(rng);
  const Index left = pos_draw(rng);
  image.block(top, left, side, side).setConstant(1.0);
  return image;
}

}  // namespace

Matrix pixel_distance_cost(Index rows, Index cols) {
  if (rows < 1 || cols < 1) throw ConfigError("image grid must be non-empty");
  const Index p = rows * cols;
  Matrix cost(p, p);
  for (Index a = 0; a < p; ++a) {
    for (Index b = 0; b < p; ++b) {
      const double dr = static_cast<double>(a / cols - b / cols);
      const double dc = static_cast<double>(a % cols - b % cols);
      cost(a, b) = std::sqrt(dr * dr + dc * dc);
    }
  }
  const double peak = cost.maxCoeff();
  if (peak > 0.0) cost /= peak;
  return cost;
}

Marginal image_marginal(const Matrix& grid, double floor) {
  if (!grid.allFinite() || (grid.array() < 0.0).any()) throw DomainError("image entries must be finite and >= 0");
  if (!(floor > 0.0)) throw ConfigError("image floor must be > 0");
  const double peak = grid.maxCoeff();
  if (!(peak > 0.0)) throw DomainError("image is all zero");
  Vector w(grid.size());
  for (Index r = 0; r < grid.rows(); ++r) {
    for (Index c = 0; c < grid.cols(); ++c) w[r * grid.cols() + c] = std::max(grid(r, c), floor * peak);
  }
  return Marginal::from_weights(w);
}

ImagePair image_pair(const Matrix& source, const Matrix& target, double floor) {
  if (source.rows() != target.rows() || source.cols() != target.cols()) {
    throw DimensionError("image pair needs grids of equal shape");
  }
  ImagePair out{source, target,
                OtInstance{pixel_distance_cost(source.rows(), source.cols()),
                           TransportPolytope{image_marginal(source, floor), image_marginal(target, floor)}}};
  return out;
}

ImagePair gen_squares(Index size, std::uint64_t seed) {
  if (size < 1) throw ConfigError("image size must be >= 1");
  std::mt19937_64 rng(seed);
  Matrix a = square_image(size, rng);
  Matrix b = square_image(size, rng);
  // The background is already a positive floor.
  return image_pair(a, b, 0.1);
}

PlantedInstance gen_planted(Index m, Index n, std::uint64_t seed) {
  if (m < 1 || n < 1) throw ConfigError("problem sizes must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> draw(0.5, 1.5);
  Coupling w(m, n);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) w(i, j) = draw(rng);
  }
  w /= w.sum();
  return {w, TransportPolytope{Marginal::from_weights(row_sums(w)), Marginal::from_weights(col_sums(w))}};
}

std::vector<std::vector<Index>> knn_graph(const Matrix& points, int k) {
  const Index n = points.rows();
  if (n < 2) throw ConfigError("k-NN graph needs at least two points");
  if (k < 1) throw ConfigError("k must be >= 1");
  const Index kk = std::min<Index>(k, n - 1);

  Matrix centered = points.colwise() - points.rowwise().mean();
  const Vector norms = centered.rowwise().norm();
  for (Index i = 0; i < n; ++i) {
    if (norms[i] > 0.0) centered.row(i) /= norms[i];
  }
  const Matrix corr = centered * centered.transpose();

  std::vector<std::vector<char>> edge(static_cast<std::size_t>(n), std::vector<char>(static_cast<std::size_t>(n), 0));
  std::vector<Index> order;
  for (Index i = 0; i < n; ++i) {
    order.resize(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    order.erase(order.begin() + i);
    std::partial_sort(order.begin(), order.begin() + kk, order.end(), [&](Index a, Index b) {
      if (corr(i, a) != corr(i, b)) return corr(i, a) > corr(i, b);
      return a < b;
    });
    for (Index q = 0; q < kk; ++q) {
      edge[i][order[q]] = 1;
      edge[order[q]][i] = 1;
    }
  }
  std::vector<std::vector<Index>> graph(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (edge[i][j]) graph[i].push_back(j);
    }
  }
  return graph;
}

Matrix shortest_path_distances(const std::vector<std::vector<Index>>& graph) {
  const auto n = static_cast<Index>(graph.size());
  Matrix dist = Matrix::Constant(n, n, std::numeric_limits<double>::infinity());
  for (Index s = 0; s < n; ++s) {
    dist(s, s) = 0.0;
    std::deque<Index> queue{s};
    while (!queue.empty()) {
      const Index a = queue.front();
      queue.pop_front();
      for (Index b : graph[a]) {
        if (std::isinf(dist(s, b))) {
          dist(s, b) = dist(s, a) + 1.0;
          queue.push_back(b);
        }
      }
    }
  }
  return dist;
}

Matrix cap_and_normalize(const Matrix& distances, double level) {
  if (!distances.allFinite()) throw DomainError("distance matrix has infinite entries");
  std::vector<double> off;
  for (Index i = 0; i < distances.rows(); ++i) {
    for (Index j = 0; j < distances.cols(); ++j) {
      if (i != j) off.push_back(distances(i, j));
    }
  }
  if (off.empty()) throw DomainError("distance matrix needs off-diagonal entries");
  const double cap = percentile(off, level);
  if (!(cap > 0.0)) throw DomainError("distance cap is zero");
  return distances.cwiseMin(cap) / cap;
}

ProcrustesData gen_procrustes_data(Index n, Index d, int k_nn, std::uint64_t seed, double noise) {
  if (n < 2 || d < 1) throw ConfigError("procrustes data needs n >= 2 and d >= 1");
  if (!(noise >= 0.0)) throw ConfigError("noise must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < d; ++c) x(i, c) = normal(rng);
  }
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix y(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < d; ++c) y(perm[i], c) = x(i, c) + noise * normal(rng);
  }

  for (int attempt = 0; attempt <= 3; ++attempt) {
    const int k = k_nn + attempt;
    const Matrix dx = shortest_path_distances(knn_graph(x, k));
    const Matrix dy = shortest_path_distances(knn_graph(y, k));
    if (dx.allFinite() && dy.allFinite()) return {cap_and_normalize(dx), cap_and_normalize(dy), perm, k};
  }
  throw ConfigError("k-NN graph still disconnected at k = " + std::to_string(k_nn + 3));
}

Coupling planted_matching(const std::vector<Index>& permutation) {
  const auto n = static_cast<Index>(permutation.size());
  Coupling p = Coupling::Zero(n, n);
  for (Index i = 0; i < n; ++i) p(i, permutation[i]) = 1.0 / static_cast<double>(n);
  return p;
}

MatchCounts threshold_matching(const Coupling& gamma, const std::vector<Index>& permutation, double c) {
  if (gamma.rows() != static_cast<Index>(permutation.size())) {
    throw DimensionError("matching: coupling rows differ from the permutation length");
  }
  const double level = c / static_cast<double>(gamma.cols());
  MatchCounts out;
  out.predicted = (gamma.array() >= level).count();
  for (Index i = 0; i < gamma.rows(); ++i) {
    if (gamma(i, permutation[i]) >= level) ++out.true_positives;
  }
  return out;
}

}  // namespace mirror_sinkhorn
