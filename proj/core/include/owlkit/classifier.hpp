#pragma once

#include <string_view>

#include "owlkit/types.hpp"

namespace owlkit {

enum class HeadKind { Linear, Cosine };

std::string_view to_string(HeadKind kind);
HeadKind parse_head_kind(std::string_view text);

/// The classification head over frozen d-dimensional embeddings, plus one
/// prototype (class mean) per class.
///
/// Linear logits are W x + b. Cosine logits are s * cos(W_c, x); the bias is
/// kept at zero and rows are renormalized after every update.
struct IncrementalClassifier {
  Matrix weights;     // C x d
  Vector bias;        // C
  Matrix prototypes;  // C x d
  HeadKind head_kind = HeadKind::Linear;
  double cosine_scale = 16.0;

  std::size_t class_count() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(weights.cols()); }

  /// Each class logit depends only on its own row, so adding classes never
  /// perturbs the logits of existing ones.
  Vector logits(const Vector& x) const;
  /// N x C logits for the rows of X.
  Matrix logits(const Matrix& X) const;

  void validate() const;

  static IncrementalClassifier empty(std::size_t dim, HeadKind kind = HeadKind::Linear,
                                     double cosine_scale = 16.0);

  bool operator==(const IncrementalClassifier& other) const;
};

/// Appends new classes. New weight rows are the prototypes (normalized for
/// cosine heads), new biases zero; existing rows are copied untouched.
IncrementalClassifier extend_head(const IncrementalClassifier& clf, std::size_t new_class_count,
                                  const Matrix& init_prototypes);

/// Nearest prototype after L2-normalizing features and prototypes. Ties go to
/// the smallest class id.
LabelVector ncm_predict(const IncrementalClassifier& clf, const Matrix& X);

struct HeadPrediction {
  LabelVector labels;
  Matrix logits;  // N x C
};

/// argmax of the head logits; ties go to the smallest class id.
HeadPrediction head_predict(const IncrementalClassifier& clf, const Matrix& X);

/// Index of the largest entry, first one on ties.
Eigen::Index argmax_first(const Vector& values);

/// Row-wise L2 normalization; zero rows stay zero.
Matrix normalize_rows(const Matrix& X);

/// Greedy herding: repeatedly add the sample that keeps the mean of the
/// selected (normalized) samples closest to the normalized class mean.
IndexVector herding_select(const Matrix& X_class, std::size_t m);

} // namespace owlkit
