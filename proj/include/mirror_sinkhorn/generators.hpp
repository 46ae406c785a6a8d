#pragma once

// Synthetic problem instances and data ingestion for the experiments.

#include <cstdint>
#include <random>
#include <vector>

#include "mirror_sinkhorn/transport.hpp"

namespace mirror_sinkhorn {

struct OtInstance {
  Matrix cost;
  TransportPolytope spec;
};

// Dirichlet(1, ..., 1) draw; redrawn while an entry is below 1e-3 / size so
// that log radii stay moderate.
Marginal random_marginal(Index size, std::mt19937_64& rng);

// Zero diagonal, off-diagonal costs iid U[0, 1], mu = nu random. The
// optimum is 0, attained by diag(mu). Throws ConfigError unless m == n.
OtInstance gen_ot_synthetic(Index m, Index n, std::uint64_t seed);

struct ImagePair {
  Matrix source_image;
  Matrix target_image;
  OtInstance problem;  // marginals are the flattened images (row-major)
};

// Dark background at 0.1, one bright axis-aligned square at 1.0 with side
// drawn in [1, size / 2] and a uniform position, per image.
ImagePair gen_squares(Index size, std::uint64_t seed);

// Pairwise Euclidean distances between the pixels of a rows x cols grid,
// divided by the largest one.
Matrix pixel_distance_cost(Index rows, Index cols);

// Grayscale grid to a marginal: entries are raised to at least
// floor * max(grid) before normalization. Throws DomainError on negative
// or non-finite entries, or an all-zero grid.
Marginal image_marginal(const Matrix& grid, double floor = 0.01);

// Two grids of equal shape with the pixel distance cost.
ImagePair image_pair(const Matrix& source, const Matrix& target, double floor = 0.01);

// Random strictly positive coupling W (entries U[0.5, 1.5], unit mass)
// together with the polytope of its own marginals.
struct PlantedInstance {
  Coupling gamma_star;
  TransportPolytope spec;
};
PlantedInstance gen_planted(Index m, Index n, std::uint64_t seed);

// Symmetric k-NN graph on the rows of `points`, with similarity given by
// the Pearson correlation between points. Adjacency lists are sorted.
std::vector<std::vector<Index>> knn_graph(const Matrix& points, int k);

// Unit-weight shortest path lengths; +inf between components.
Matrix shortest_path_distances(const std::vector<std::vector<Index>>& graph);

// min(D, q) / q where q is the given percentile of the off-diagonal
// entries. Throws DomainError if D has an infinite entry or q is 0.
Matrix cap_and_normalize(const Matrix& distances, double level = 0.95);

struct ProcrustesData {
  Matrix kx;
  Matrix ky;
  // Point i of X is point permutation[i] of Y.
  std::vector<Index> permutation;
  int k_used = 0;
};

// n Gaussian points in dimension d for X; Y holds the same points in a
// hidden order plus Gaussian noise of the given scale. A disconnected k-NN
// graph is retried with k + 1 up to three times before ConfigError.
ProcrustesData gen_procrustes_data(Index n, Index d, int k_nn, std::uint64_t seed, double noise = 0.1);

// Permutation matrix / n for the planted matching.
Coupling planted_matching(const std::vector<Index>& permutation);

struct MatchCounts {
  Index predicted = 0;       // entries of gamma >= c / n
  Index true_positives = 0;  // planted pairs among them
};

MatchCounts threshold_matching(const Coupling& gamma, const std::vector<Index>& permutation, double c = 0.5);

}  // namespace mirror_sinkhorn
