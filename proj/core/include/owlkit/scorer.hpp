#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "owlkit/classifier.hpp"
#include "owlkit/embedding.hpp"

namespace owlkit {

/// Post-hoc score functions. Every method follows one convention: a HIGHER
/// score means more in-distribution.
///
///   msp       max softmax(z)
///   mls       max z
///   energy    T * logsumexp(z / T)
///   tsoftmax  max softmax(z / T)           (temperature-scaled softmax, T = 1000)
///   mds       -min_c ||L^T (x - mu_c)||    (L L^T = shrunk shared precision)
///   vim       max z - alpha * ||(I - P P^T)(x - mu)||
///   knn       -(distance from x/||x|| to its k-th nearest normalized train row)
enum class ScoreMethod { Msp, Mls, Energy, TSoftmax, Mds, Vim, Knn };

std::string_view to_string(ScoreMethod method);
ScoreMethod parse_score_method(std::string_view text);

struct ScorerConfig {
  ScoreMethod method = ScoreMethod::Msp;
  /// Unset means the method default: 1000 for tsoftmax, 1 otherwise.
  std::optional<double> temperature;
  double vim_variance_target = 0.90;
  std::optional<int> vim_dim_override;
  int knn_k = 50;
  double shrinkage_scale = 1e-6;

  double effective_temperature() const;
  void validate() const;

  bool operator==(const ScorerConfig&) const = default;
};

/// Immutable fitted statistics for one method. Only the blocks the method
/// needs are populated; the rest stay empty.
struct FittedScorer {
  ScorerConfig config;
  std::size_t class_count = 0;
  std::size_t dim = 0;

  // mds
  Matrix class_means;              // C x d
  Matrix shared_covariance;        // d x d, pooled within-class, before shrinkage
  Matrix shared_precision_factor;  // d x d lower-triangular, L L^T = (Sigma + eps I)^-1
  // vim
  Vector feature_mean;             // d
  Matrix feature_covariance;       // d x d, around feature_mean
  Matrix principal_basis;          // d x p, orthonormal columns
  double alpha = 1.0;
  // knn
  Matrix train_features;           // row-normalized
  std::size_t fit_count = 0;       // samples behind the covariance statistics

  // calibration
  Matrix calibration_features;     // held-out ID rows
  std::vector<double> id_val_scores;
  double target_tpr = 0.95;
  double threshold = 0.0;
  bool calibrated = false;

  bool operator==(const FittedScorer& other) const;
};

/// Held-out calibration rule: sample ids with id % 10 == 7.
constexpr bool is_calibration_id(std::int64_t id) { return id % 10 == 7; }

/// Fits on the rows of `train` outside the calibration split and scores the
/// calibration rows into id_val_scores.
FittedScorer fit_scorer(const ScorerConfig& config, const EmbeddingSet& train,
                        const IncrementalClassifier& classifier);

/// Scorer for logit-only methods (msp, mls, energy, tsoftmax); needs no data.
FittedScorer logit_scorer(const ScorerConfig& config, std::size_t class_count, std::size_t dim);

double score(const FittedScorer& scorer, const Vector& feature, const Vector& logits);

/// Scores the rows of X in order.
std::vector<double> score_batch(const FittedScorer& scorer, const IncrementalClassifier& classifier,
                                const Matrix& X);

/// Replaces the held-out calibration rows with X and rescores them. Any
/// stored threshold is left as is until the next calibrate_threshold.
FittedScorer with_calibration_set(const FittedScorer& scorer, const IncrementalClassifier& classifier,
                                  const Matrix& X);

/// tau = largest value with #{s >= tau} / N_val >= target_tpr. Stores tau and
/// the target in the scorer and returns tau.
double calibrate_threshold(FittedScorer& scorer, double target_tpr);

struct ThresholdSplit {
  IndexVector id_indices;   // score >= tau, ascending
  IndexVector ood_indices;  // score < tau, ascending
};

ThresholdSplit split_by_threshold(std::span<const double> scores, double tau);

/// ViM subspace residual ||(I - P P^T)(x - mu)||.
double vim_residual(const FittedScorer& scorer, const Vector& feature);

/// Extends a scorer after new classes were learned. Class means (mds) and
/// normalized features (knn) of the new classes are appended; calibration rows
/// among them join the held-out set, which is rescored with the updated
/// classifier and recalibrated at the stored target. With full_refit the shared
/// covariance (mds) and principal subspace (vim) are re-estimated as well.
FittedScorer refit_with_new_classes(const FittedScorer& scorer, const IncrementalClassifier& updated,
                                    const Matrix& X, std::span<const Label> labels,
                                    std::span<const std::int64_t> ids, bool full_refit);

} // namespace owlkit
