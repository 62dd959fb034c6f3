#pragma once

#include <filesystem>
#include <optional>
#include <span>

#include "owlkit/types.hpp"

namespace owlkit {

/// N x d feature vectors with optional labels (-1 = unlabeled) and stable ids.
///
/// Files hold only features and labels; ids of a loaded set are the row
/// indices 0..N-1 of the file.
struct EmbeddingSet {
  RowMatrixF features;
  std::optional<LabelVector> labels;
  IdVector ids;

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
  bool labeled() const { return labels.has_value(); }

  /// Features widened to f64, one sample per row.
  Matrix to_matrix() const;
  Vector row(std::size_t i) const;

  /// Rows picked by index, in the order given. Ids and labels follow.
  EmbeddingSet subset(std::span<const std::size_t> rows) const;

  /// Throws Data/Consistency errors if any invariant is violated.
  void validate() const;

  static EmbeddingSet from_matrix(const Matrix& features, std::optional<LabelVector> labels = {});
};

bool operator==(const EmbeddingSet& a, const EmbeddingSet& b);

IdVector sequential_ids(std::size_t n);

EmbeddingSet load_embeddings(const std::filesystem::path& feature_path,
                             const std::optional<std::filesystem::path>& label_path = {});

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& feature_path,
                     const std::optional<std::filesystem::path>& label_path = {});

LabelVector load_labels(const std::filesystem::path& label_path);

} // namespace owlkit
