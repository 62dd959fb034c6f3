#include "owlkit/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "owlkit/error.hpp"
#include "owlkit/rng.hpp"

namespace owlkit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double squared_distance(const Matrix& X, Eigen::Index row, const Matrix& centroids, Eigen::Index c) {
  return (X.row(row) - centroids.row(c)).squaredNorm();
}

std::vector<std::size_t> order_by_id(std::span<const std::int64_t> ids) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  return order;
}

// D^2-weighted sampling by exponential races: point i wins with probability
// w_i / sum(w) and the outcome depends only on (key, id_i, w_i).
Matrix seed_plus_plus(const Matrix& X, std::span<const std::int64_t> ids,
                      const std::vector<std::size_t>& order, std::size_t k, std::uint64_t seed) {
  const auto m = X.rows();
  Matrix centroids(static_cast<Eigen::Index>(k), X.cols());
  std::vector<double> nearest(static_cast<std::size_t>(m), kInf);
  std::vector<bool> chosen(static_cast<std::size_t>(m), false);

  for (std::size_t round = 0; round < k; ++round) {
    const std::uint64_t key = rng::derive_key(seed, round);
    double best_race = kInf;
    std::size_t best = order.front();
    bool found = false;
    for (const auto i : order) {
      const double weight = round == 0 ? 1.0 : nearest[i];
      if (weight <= 0.0 || chosen[i]) continue;
      const double u = rng::to_unit_open_low(rng::draw(key, static_cast<std::uint64_t>(ids[i])));
      const double race = -std::log(u) / weight;
      if (race < best_race) {
        best_race = race;
        best = i;
        found = true;
      }
    }
    if (!found) {
      // Every remaining point coincides with a chosen center; fall back to a
      // uniform pick among unchosen points.
      for (const auto i : order) {
        if (chosen[i]) continue;
        const double u = rng::to_unit_open_low(rng::draw(key, static_cast<std::uint64_t>(ids[i])));
        const double race = -std::log(u);
        if (!found || race < best_race) {
          best_race = race;
          best = i;
          found = true;
        }
      }
    }
    chosen[best] = true;
    centroids.row(static_cast<Eigen::Index>(round)) = X.row(static_cast<Eigen::Index>(best));
    for (const auto i : order) {
      nearest[i] = std::min(nearest[i], squared_distance(X, static_cast<Eigen::Index>(i), centroids,
                                                         static_cast<Eigen::Index>(round)));
    }
  }
  return centroids;
}

struct AssignStep {
  std::vector<std::size_t> assignments;
  std::vector<double> dist2;
};

AssignStep assign(const Matrix& X, const Matrix& centroids) {
  AssignStep step;
  const auto m = static_cast<std::size_t>(X.rows());
  step.assignments.assign(m, 0);
  step.dist2.assign(m, kInf);
  for (std::size_t i = 0; i < m; ++i) {
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d2 = squared_distance(X, static_cast<Eigen::Index>(i), centroids, c);
      if (d2 < step.dist2[i]) {  // strict: ties keep the smaller cluster id
        step.dist2[i] = d2;
        step.assignments[i] = static_cast<std::size_t>(c);
      }
    }
  }
  return step;
}

void repair_empty(const Matrix& X, const std::vector<std::size_t>& order, Matrix& centroids,
                  AssignStep& step) {
  const auto k = static_cast<std::size_t>(centroids.rows());
  std::vector<std::size_t> sizes(k, 0);
  for (const auto a : step.assignments) ++sizes[a];
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] != 0) continue;
    double far = -1.0;
    std::size_t pick = order.front();
    for (const auto i : order) {
      if (sizes[step.assignments[i]] > 1 && step.dist2[i] > far) {
        far = step.dist2[i];
        pick = i;
      }
    }
    if (far < 0.0) continue;  // fewer points than clusters
    --sizes[step.assignments[pick]];
    ++sizes[c];
    step.assignments[pick] = c;
    step.dist2[pick] = 0.0;
    centroids.row(static_cast<Eigen::Index>(c)) = X.row(static_cast<Eigen::Index>(pick));
  }
}

double ordered_sum(const std::vector<double>& values, const std::vector<std::size_t>& order) {
  double total = 0.0;
  for (const auto i : order) total += values[i];
  return total;
}

} // namespace

ClusterResult kmeans(const Matrix& X, std::span<const std::int64_t> ids, std::size_t k,
                     const KMeansOptions& options) {
  const auto m = static_cast<std::size_t>(X.rows());
  require(k >= 1, ErrorKind::Argument, "k must be at least 1");
  require(m >= k, ErrorKind::Argument,
          "kmeans needs at least k points (M=" + std::to_string(m) + ", k=" + std::to_string(k) + ")");
  require(ids.size() == m, ErrorKind::Argument, "kmeans ids length differs from row count");
  require(X.allFinite(), ErrorKind::Argument, "kmeans input must be finite");
  require(options.max_iter >= 1, ErrorKind::Argument, "max_iter must be positive");
  require(options.tol >= 0.0, ErrorKind::Argument, "tol must be non-negative");

  const auto order = order_by_id(ids);
  ClusterResult result;
  result.k = k;
  Matrix centroids = seed_plus_plus(X, ids, order, k, options.seed);

  for (int iter = 1; iter <= options.max_iter; ++iter) {
    AssignStep step = assign(X, centroids);
    repair_empty(X, order, centroids, step);
    result.inertia_trace.push_back(ordered_sum(step.dist2, order));

    Matrix sums = Matrix::Zero(centroids.rows(), centroids.cols());
    std::vector<std::size_t> counts(k, 0);
    for (const auto i : order) {
      sums.row(static_cast<Eigen::Index>(step.assignments[i])) += X.row(static_cast<Eigen::Index>(i));
      ++counts[step.assignments[i]];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      const auto row = static_cast<Eigen::Index>(c);
      const Eigen::RowVectorXd updated = sums.row(row) / static_cast<double>(counts[c]);
      shift = std::max(shift, (updated - centroids.row(row)).norm());
      centroids.row(row) = updated;
    }
    result.iterations = iter;
    if (shift <= options.tol) break;
  }

  AssignStep last = assign(X, centroids);
  repair_empty(X, order, centroids, last);
  result.assignments = std::move(last.assignments);
  result.inertia = ordered_sum(last.dist2, order);
  result.inertia_trace.push_back(result.inertia);
  result.centroids = std::move(centroids);
  return result;
}

ClusterResult kmeans(const Matrix& X, std::size_t k, const KMeansOptions& options) {
  const auto ids = sequential_ids(static_cast<std::size_t>(X.rows()));
  return kmeans(X, ids, k, options);
}

double recompute_inertia(const Matrix& X, std::span<const std::size_t> assignments,
                         const Matrix& centroids) {
  double total = 0.0;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    total += squared_distance(X, static_cast<Eigen::Index>(i), centroids,
                              static_cast<Eigen::Index>(assignments[i]));
  }
  return total;
}

Matrix pairwise_distances(const Matrix& X) {
  const auto m = X.rows();
  Matrix d = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      d(i, j) = d(j, i) = (X.row(i) - X.row(j)).norm();
    }
  }
  return d;
}

double mean_silhouette(const Matrix& distances, std::span<const std::size_t> assignments, std::size_t k) {
  const auto m = assignments.size();
  if (m == 0) return 0.0;
  std::vector<std::size_t> sizes(k, 0);
  for (const auto a : assignments) ++sizes[a];
  const auto non_empty = std::count_if(sizes.begin(), sizes.end(), [](std::size_t s) { return s > 0; });
  if (non_empty < 2) return 0.0;

  double total = 0.0;
  std::vector<double> sum_to(k);
  for (std::size_t i = 0; i < m; ++i) {
    const auto own = assignments[i];
    if (sizes[own] <= 1) continue;
    std::fill(sum_to.begin(), sum_to.end(), 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      sum_to[assignments[j]] += distances(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    const double a = sum_to[own] / static_cast<double>(sizes[own] - 1);
    if (a <= 0.0) continue;  // zero-spread cluster
    double b = kInf;
    for (std::size_t c = 0; c < k; ++c) {
      if (c == own || sizes[c] == 0) continue;
      b = std::min(b, sum_to[c] / static_cast<double>(sizes[c]));
    }
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(m);
}

ClusterResult best_of_kmeans(const Matrix& X, std::span<const std::int64_t> ids, std::size_t k,
                             std::uint64_t seed, int restarts) {
  require(restarts >= 1, ErrorKind::Argument, "restarts must be at least 1");
  ClusterResult best = kmeans(X, ids, k, {.seed = seed});
  for (int r = 1; r < restarts; ++r) {
    auto candidate = kmeans(X, ids, k, {.seed = rng::derive_key(seed, static_cast<std::uint64_t>(r))});
    if (candidate.inertia < best.inertia) best = std::move(candidate);
  }
  return best;
}

std::size_t default_k_max(std::size_t m) {
  const auto root = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(m))));
  return std::min<std::size_t>(root, 20);
}

std::size_t estimate_k(const Matrix& X, std::span<const std::int64_t> ids, std::size_t k_min,
                       std::size_t k_max, std::uint64_t seed) {
  const auto m = static_cast<std::size_t>(X.rows());
  require(k_min >= 2, ErrorKind::Argument, "k_min must be at least 2");
  require(k_max >= k_min, ErrorKind::Argument, "k_max must be >= k_min");
  require(m >= k_max + 1 && m >= 3, ErrorKind::Argument,
          "estimate_k needs M >= k_max + 1 >= 3 (M=" + std::to_string(m) + ")");

  const Matrix distances = pairwise_distances(X);
  std::size_t best_k = k_min;
  double best_score = -kInf;
  for (std::size_t k = k_min; k <= k_max; ++k) {
    const auto result = best_of_kmeans(X, ids, k, seed, kDiscoverRestarts);
    const double score = mean_silhouette(distances, result.assignments, k);
    if (score > best_score) {
      best_score = score;
      best_k = k;
    }
  }
  return best_k;
}

Discovery discover(const EmbeddingSet& unknown, std::optional<std::size_t> k, std::uint64_t seed) {
  const auto m = unknown.size();
  require(m >= 1, ErrorKind::Data, "no unknown samples to discover classes in");
  Discovery out;
  const Matrix X = unknown.to_matrix();
  if (m == 1) {
    out.k = 1;
    out.labels = {0};
    out.centroids = X;
    return out;
  }
  std::size_t clusters = 1;
  if (k) {
    require(*k >= 1 && *k <= m, ErrorKind::Argument,
            "requested k=" + std::to_string(*k) + " with only " + std::to_string(m) + " samples");
    clusters = *k;
  } else {
    const std::size_t k_max = std::min(default_k_max(m), m - 1);
    if (k_max >= 2) clusters = estimate_k(X, unknown.ids, 2, k_max, seed);
  }
  const auto result = best_of_kmeans(X, unknown.ids, clusters, seed, kDiscoverRestarts);
  out.k = clusters;
  out.centroids = result.centroids;
  out.labels.reserve(m);
  for (const auto a : result.assignments) out.labels.push_back(static_cast<Label>(a));
  return out;
}

} // namespace owlkit
