#include "mirror_sinkhorn/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "mirror_sinkhorn/rounding.hpp"

namespace mirror_sinkhorn {

namespace {

void check_cost(const Matrix& cost, const TransportPolytope& spec, const char* who) {
  if (cost.rows() != spec.m() || cost.cols() != spec.n()) {
    throw DimensionError(std::string(who) + ": cost is " + std::to_string(cost.rows()) + "x" +
                         std::to_string(cost.cols()) + ", marginals are " + std::to_string(spec.m()) + "x" +
                         std::to_string(spec.n()));
  }
  if (!cost.allFinite()) throw DomainError(std::string(who) + ": cost has non-finite entries");
}

double transport_cost(const Matrix& cost, const Matrix& gamma) { return cost.cwiseProduct(gamma).sum(); }

}  // namespace

RunTrace sinkhorn(const Matrix& cost, double alpha, const TransportPolytope& spec, std::int64_t iterations,
                  const SinkhornOptions& options) {
  check_cost(cost, spec, "sinkhorn");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("sinkhorn: alpha must be finite and > 0");
  if (iterations < 1) throw ConfigError("sinkhorn: iterations must be >= 1");

  const bool log_domain = cost.cwiseAbs().maxCoeff() / alpha > options.log_domain_threshold;
  Matrix log_gamma = -cost / alpha;
  Coupling gamma = log_gamma.array().exp().matrix();

  RunTrace trace;
  for (std::int64_t t = 1; t <= iterations; ++t) {
    if (log_domain) {
      if (t % 2 == 1) {
        row_normalize_log(log_gamma, spec.rows);
      } else {
        col_normalize_log(log_gamma, spec.cols);
      }
      gamma = log_gamma.array().exp().matrix();
    } else if (t % 2 == 1) {
      row_normalize_in_place(gamma, spec.rows);
    } else {
      col_normalize_in_place(gamma, spec.cols);
    }
    if (is_checkpoint(t, iterations, options.checkpoint_stride)) {
      Checkpoint cp;
      cp.t = t;
      cp.normalizations = t;
      cp.f_value = transport_cost(cost, gamma);
      cp.c_avg = cp.c_iter = constraint_violation(gamma, spec);
      trace.checkpoints.push_back(cp);
    }
  }
  trace.output = gamma;
  trace.last_iterate = gamma;
  trace.rounded = round_to_polytope(gamma, spec);
  trace.used_log_domain = log_domain;
  return trace;
}

ExactTransport transport_simplex(const Matrix& cost, const TransportPolytope& spec) {
  check_cost(cost, spec, "transport_simplex");
  const Index m = spec.m();
  const Index n = spec.n();
  const Index nodes = m + n;  // rows 0..m-1, columns m..m+n-1
  const auto cell = [n](Index i, Index j) { return i * n + j; };

  Matrix x = Matrix::Zero(m, n);
  std::vector<char> basic(static_cast<std::size_t>(m * n), 0);

  // North-west corner: m + n - 1 cells forming a staircase tree.
  {
    Vector a = spec.rows.values();
    Vector b = spec.cols.values();
    Index i = 0;
    Index j = 0;
    while (true) {
      const double q = std::min(a[i], b[j]);
      x(i, j) = q;
      basic[cell(i, j)] = 1;
      a[i] -= q;
      b[j] -= q;
      if (i == m - 1 && j == n - 1) break;
      if (i == m - 1) {
        ++j;
      } else if (j == n - 1 || a[i] <= b[j]) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  const double tol = 1e-12 * std::max(1.0, cost.cwiseAbs().maxCoeff());
  const std::int64_t max_pivots = 1000 + 200 * static_cast<std::int64_t>(m * n);

  std::vector<std::vector<std::pair<Index, Index>>> adj(static_cast<std::size_t>(nodes));
  std::vector<double> potential(static_cast<std::size_t>(nodes));
  std::vector<Index> parent_node(static_cast<std::size_t>(nodes));
  std::vector<Index> parent_cell(static_cast<std::size_t>(nodes));

  for (std::int64_t pivot = 0;; ++pivot) {
    if (pivot > max_pivots) throw Error("transport_simplex: pivot limit reached");

    for (auto& a : adj) a.clear();
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (!basic[cell(i, j)]) continue;
        adj[i].push_back({m + j, cell(i, j)});
        adj[m + j].push_back({i, cell(i, j)});
      }
    }

    // u_i + v_j = C_ij on the basis, u_0 = 0.
    std::vector<char> seen(static_cast<std::size_t>(nodes), 0);
    std::deque<Index> queue{0};
    seen[0] = 1;
    potential[0] = 0.0;
    while (!queue.empty()) {
      const Index a = queue.front();
      queue.pop_front();
      for (const auto& [b, c] : adj[a]) {
        if (seen[b]) continue;
        seen[b] = 1;
        potential[b] = cost(c / n, c % n) - potential[a];
        queue.push_back(b);
      }
    }

    Index entering = -1;
    for (Index c = 0; c < m * n && entering < 0; ++c) {
      if (basic[c]) continue;
      const Index i = c / n;
      const Index j = c % n;
      if (cost(i, j) - potential[i] - potential[m + j] < -tol) entering = c;
    }
    if (entering < 0) break;

    // Tree path from the entering row to the entering column closes the cycle.
    const Index ei = entering / n;
    const Index ej = entering % n;
    std::fill(seen.begin(), seen.end(), 0);
    queue.assign(1, ei);
    seen[ei] = 1;
    while (!queue.empty() && !seen[m + ej]) {
      const Index a = queue.front();
      queue.pop_front();
      for (const auto& [b, c] : adj[a]) {
        if (seen[b]) continue;
        seen[b] = 1;
        parent_node[b] = a;
        parent_cell[b] = c;
        queue.push_back(b);
      }
    }
    std::vector<Index> path;
    for (Index v = m + ej; v != ei; v = parent_node[v]) path.push_back(parent_cell[v]);
    std::reverse(path.begin(), path.end());

    // Cells at even positions along the path lose theta.
    double theta = std::numeric_limits<double>::infinity();
    Index leaving = -1;
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const Index c = path[k];
      const double v = x(c / n, c % n);
      if (v < theta || (v == theta && c < leaving)) {
        theta = v;
        leaving = c;
      }
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
      const Index c = path[k];
      x(c / n, c % n) += k % 2 == 0 ? -theta : theta;
    }
    x(ei, ej) = theta;
    x(leaving / n, leaving % n) = 0.0;
    basic[entering] = 1;
    basic[leaving] = 0;
  }

  return {transport_cost(cost, x), x};
}

ExactTransport exact_ot_enumerate(const Matrix& cost, const TransportPolytope& spec) {
  check_cost(cost, spec, "exact_ot_enumerate");
  const Index m = spec.m();
  const Index n = spec.n();
  const Index cells = m * n;
  if (cells > 16) throw SizeLimitError("exact_ot_enumerate: mn = " + std::to_string(cells) + " exceeds 16");
  const Index k = m + n - 1;

  std::vector<Index> pick(static_cast<std::size_t>(k));
  std::iota(pick.begin(), pick.end(), Index{0});

  ExactTransport best;
  best.value = std::numeric_limits<double>::infinity();

  while (true) {
    // Spanning tree check by union-find; k = nodes - 1 edges without a cycle span.
    std::vector<Index> root(static_cast<std::size_t>(m + n));
    std::iota(root.begin(), root.end(), Index{0});
    const auto find = [&root](Index v) {
      while (root[v] != v) v = root[v] = root[root[v]];
      return v;
    };
    bool tree = true;
    for (Index c : pick) {
      const Index a = find(c / n);
      const Index b = find(m + c % n);
      if (a == b) {
        tree = false;
        break;
      }
      root[a] = b;
    }

    if (tree) {
      // Peel leaves: a leaf's remaining mass fixes its only edge.
      std::vector<double> rest(static_cast<std::size_t>(m + n));
      for (Index i = 0; i < m; ++i) rest[i] = spec.rows[i];
      for (Index j = 0; j < n; ++j) rest[m + j] = spec.cols[j];
      std::vector<int> degree(static_cast<std::size_t>(m + n), 0);
      for (Index c : pick) {
        ++degree[c / n];
        ++degree[m + c % n];
      }
      std::vector<char> used(pick.size(), 0);
      Matrix plan = Matrix::Zero(m, n);
      bool feasible = true;
      for (std::size_t step = 0; step < pick.size(); ++step) {
        std::size_t e = 0;
        Index leaf = -1;
        for (e = 0; e < pick.size(); ++e) {
          if (used[e]) continue;
          const Index r = pick[e] / n;
          const Index c = m + pick[e] % n;
          if (degree[r] == 1) {
            leaf = r;
            break;
          }
          if (degree[c] == 1) {
            leaf = c;
            break;
          }
        }
        const Index r = pick[e] / n;
        const Index c = m + pick[e] % n;
        const Index other = leaf == r ? c : r;
        const double flow = rest[leaf];
        if (flow < -1e-13) {
          feasible = false;
          break;
        }
        plan(r, c - m) = std::max(flow, 0.0);
        rest[other] -= flow;
        rest[leaf] = 0.0;
        --degree[r];
        --degree[c];
        used[e] = 1;
      }
      if (feasible) {
        const double value = transport_cost(cost, plan);
        if (value < best.value) {
          best.value = value;
          best.plan = plan;
        }
      }
    }

    // Next k-subset in lexicographic order.
    Index pos = k - 1;
    while (pos >= 0 && pick[pos] == cells - k + pos) --pos;
    if (pos < 0) break;
    ++pick[pos];
    for (Index q = pos + 1; q < k; ++q) pick[q] = pick[q - 1] + 1;
  }
  return best;
}

ExactTransport exact_ot_small(const Matrix& cost, const TransportPolytope& spec) {
  const Index cells = spec.m() * spec.n();
  if (cells > 64) throw SizeLimitError("exact_ot_small: mn = " + std::to_string(cells) + " exceeds 64");
  try {
    return transport_simplex(cost, spec);
  } catch (const DimensionError&) {
    throw;
  } catch (const DomainError&) {
    throw;
  } catch (const Error&) {
    if (cells > 16) throw;
    return exact_ot_enumerate(cost, spec);
  }
}

}  // namespace mirror_sinkhorn
