#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "owlkit/embedding.hpp"
#include "owlkit/types.hpp"

namespace owlkit {

struct ClusterResult {
  std::vector<std::size_t> assignments;  // length M, values in [0, k)
  Matrix centroids;                      // k x d
  double inertia = 0.0;                  // sum of squared distances to assigned centroid
  int iterations = 0;                    // Lloyd iterations run
  std::size_t k = 0;
  /// Inertia after each assignment step, plus the final one.
  std::vector<double> inertia_trace;
};

struct KMeansOptions {
  std::uint64_t seed = 0;
  int max_iter = 300;
  double tol = 1e-6;
};

/// Lloyd's algorithm from k-means++ seeding.
///
/// Seeding draws are keyed by (seed, round, sample id) rather than row
/// position, and every reduction runs in ascending-id order, so permuting the
/// rows of X (together with their ids) permutes the assignments and nothing
/// else. Empty clusters are re-seeded at the point farthest from its centroid.
ClusterResult kmeans(const Matrix& X, std::span<const std::int64_t> ids, std::size_t k,
                     const KMeansOptions& options = {});

/// Same, with ids = row indices.
ClusterResult kmeans(const Matrix& X, std::size_t k, const KMeansOptions& options = {});

/// Lowest-inertia result of `restarts` runs; run r > 0 uses derive_key(seed, r).
/// Ties keep the earlier run.
ClusterResult best_of_kmeans(const Matrix& X, std::span<const std::int64_t> ids, std::size_t k,
                             std::uint64_t seed, int restarts);

/// Restarts used by estimate_k and discover.
inline constexpr int kDiscoverRestarts = 8;

/// Sum of squared distances of each row to its assigned centroid.
double recompute_inertia(const Matrix& X, std::span<const std::size_t> assignments,
                         const Matrix& centroids);

/// Pairwise Euclidean distances between rows.
Matrix pairwise_distances(const Matrix& X);

/// Mean silhouette coefficient. Points in singleton or zero-spread clusters
/// contribute 0; a single non-empty cluster scores 0.
double mean_silhouette(const Matrix& distances, std::span<const std::size_t> assignments, std::size_t k);

/// min(ceil(sqrt(M)), 20).
std::size_t default_k_max(std::size_t m);

/// argmax over k in [k_min, k_max] of the mean silhouette of best_of_kmeans(k); ties
/// go to the smaller k. Requires M >= k_max + 1 >= 3 and 2 <= k_min <= k_max.
std::size_t estimate_k(const Matrix& X, std::span<const std::int64_t> ids, std::size_t k_min,
                       std::size_t k_max, std::uint64_t seed);

struct Discovery {
  LabelVector labels;  // provisional cluster ids 0..k-1
  Matrix centroids;    // k x d
  std::size_t k = 0;
};

/// Partitions unknown samples into provisional classes. With k absent the
/// count is estimated with k_max = min(default_k_max(M), M - 1); fewer than
/// three samples then form a single class. One sample is one class.
Discovery discover(const EmbeddingSet& unknown, std::optional<std::size_t> k, std::uint64_t seed);

} // namespace owlkit
