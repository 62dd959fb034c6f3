#pragma once

#include <map>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "owlkit/types.hpp"

namespace owlkit::metrics {

struct DetectionReport {
  double auroc = 0.0;
  double aupr_in = 0.0;
  double fpr_at_tpr = 0.0;
  double tpr_target = 0.95;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
};

/// P(random ID score > random OOD score), ties credited 1/2. Uses midranks.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

/// Largest tau with #{s >= tau} / N >= target_tpr. Always one of the scores.
double threshold_for_tpr(std::span<const double> scores, double target_tpr);

/// FPR at the operating threshold threshold_for_tpr(id_scores, tpr).
double fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores, double tpr);

/// Area under the precision-recall curve with ID as the positive class
/// (average precision; tied scores form one step).
double aupr_in(std::span<const double> id_scores, std::span<const double> ood_scores);

DetectionReport detection_report(std::span<const double> id_scores,
                                 std::span<const double> ood_scores, double tpr = 0.95);

double accuracy(std::span<const Label> pred, std::span<const Label> truth);
std::map<Label, double> per_class_accuracy(std::span<const Label> pred, std::span<const Label> truth);
/// Rows index the true class, columns the predicted class. Labels must be >= 0.
Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> confusion(std::span<const Label> pred,
                                                                      std::span<const Label> truth);

/// Mutual information over the arithmetic mean of the two entropies.
double nmi(std::span<const Label> a, std::span<const Label> b);
double purity(std::span<const Label> clusters, std::span<const Label> truth);
/// Best one-to-one cluster/class matching accuracy (Hungarian on the padded
/// overlap matrix).
double cluster_accuracy(std::span<const Label> clusters, std::span<const Label> truth);

/// Mapping cluster value -> truth value chosen by cluster_accuracy's matching.
/// Clusters matched only to padding are absent.
std::map<Label, Label> cluster_to_truth_mapping(std::span<const Label> clusters,
                                                std::span<const Label> truth);

double avg_accuracy(std::span<const double> session_accs);

/// acc(t, j) = accuracy on task j after learning task t (j <= t). Returns the
/// mean over tasks j < T-1 of max_{j<=t<T-1} acc(t, j) - acc(T-1, j); 0 for T = 1.
double forgetting(const Matrix& acc_matrix);

/// Half-up rounding used at report boundaries.
double round_half_up(double value, int decimals = 2);

} // namespace owlkit::metrics
