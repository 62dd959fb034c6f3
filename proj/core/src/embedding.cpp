#include "owlkit/embedding.hpp"

#include <cmath>
#include <cstring>
#include <numeric>
#include <unordered_set>

#include "owlkit/error.hpp"
#include "owlkit/npy.hpp"

namespace owlkit {

Matrix EmbeddingSet::to_matrix() const { return features.cast<double>(); }

Vector EmbeddingSet::row(std::size_t i) const {
  return features.row(static_cast<Eigen::Index>(i)).transpose().cast<double>();
}

EmbeddingSet EmbeddingSet::subset(std::span<const std::size_t> rows) const {
  EmbeddingSet out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.ids.reserve(rows.size());
  if (labels) out.labels.emplace().reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = rows[r];
    require(src < size(), ErrorKind::Argument, "subset row index out of range");
    out.features.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(src));
    out.ids.push_back(ids[src]);
    if (labels) out.labels->push_back((*labels)[src]);
  }
  return out;
}

void EmbeddingSet::validate() const {
  require(features.cols() >= 1, ErrorKind::Data, "embedding dimension must be at least 1");
  require(ids.size() == size(), ErrorKind::Consistency,
          "ids length " + std::to_string(ids.size()) + " != N " + std::to_string(size()));
  if (labels) {
    require(labels->size() == size(), ErrorKind::Consistency,
            "labels length " + std::to_string(labels->size()) + " != N " + std::to_string(size()));
    for (const auto y : *labels) {
      require(y >= kUnlabeled, ErrorKind::Data, "label " + std::to_string(y) + " is below -1");
    }
  }
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
      require(std::isfinite(features(i, j)), ErrorKind::Data,
              "non-finite feature at row " + std::to_string(i) + ", column " + std::to_string(j));
    }
  }
  std::unordered_set<std::int64_t> seen;
  seen.reserve(ids.size());
  for (const auto id : ids) {
    require(id >= 0, ErrorKind::Data, "sample ids must be non-negative");
    require(seen.insert(id).second, ErrorKind::Data, "duplicate sample id " + std::to_string(id));
  }
}

EmbeddingSet EmbeddingSet::from_matrix(const Matrix& features, std::optional<LabelVector> labels) {
  EmbeddingSet out;
  out.features = features.cast<float>();
  out.labels = std::move(labels);
  out.ids = sequential_ids(static_cast<std::size_t>(features.rows()));
  return out;
}

bool operator==(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (a.features.rows() != b.features.rows() || a.features.cols() != b.features.cols()) return false;
  const auto bytes = static_cast<std::size_t>(a.features.size()) * sizeof(float);
  return std::memcmp(a.features.data(), b.features.data(), bytes) == 0 && a.labels == b.labels &&
         a.ids == b.ids;
}

IdVector sequential_ids(std::size_t n) {
  IdVector ids(n);
  std::iota(ids.begin(), ids.end(), std::int64_t{0});
  return ids;
}

LabelVector load_labels(const std::filesystem::path& label_path) {
  const auto array = npy::read(label_path);
  require(array.dtype == npy::DType::Int64, ErrorKind::Format,
          label_path.string() + ": labels must be '<i8'");
  require(array.shape.size() == 1, ErrorKind::Format,
          label_path.string() + ": labels must be one-dimensional");
  return array.values<std::int64_t>();
}

EmbeddingSet load_embeddings(const std::filesystem::path& feature_path,
                             const std::optional<std::filesystem::path>& label_path) {
  const auto array = npy::read(feature_path);
  require(array.dtype == npy::DType::Float32, ErrorKind::Format,
          feature_path.string() + ": features must be '<f4'");
  require(array.shape.size() == 2, ErrorKind::Format,
          feature_path.string() + ": features must have shape (N, d)");
  const auto n = static_cast<Eigen::Index>(array.shape[0]);
  const auto d = static_cast<Eigen::Index>(array.shape[1]);
  require(d >= 1, ErrorKind::Format, feature_path.string() + ": feature dimension must be >= 1");

  EmbeddingSet set;
  set.features.resize(n, d);
  if (!array.payload.empty()) {
    std::memcpy(set.features.data(), array.payload.data(), array.payload.size());
  }
  set.ids = sequential_ids(static_cast<std::size_t>(n));
  if (label_path) {
    set.labels = load_labels(*label_path);
    require(set.labels->size() == static_cast<std::size_t>(n), ErrorKind::Consistency,
            "features have " + std::to_string(n) + " rows but " + label_path->string() + " has " +
                std::to_string(set.labels->size()) + " labels");
  }
  set.validate();
  return set;
}

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& feature_path,
                     const std::optional<std::filesystem::path>& label_path) {
  set.validate();
  const std::span<const float> values(set.features.data(), static_cast<std::size_t>(set.features.size()));
  npy::write(feature_path, npy::Array::from(values, {set.size(), set.dim()}));
  if (label_path) {
    require(set.labels.has_value(), ErrorKind::Argument, "label path given for an unlabeled set");
    npy::write(*label_path, npy::Array::from(std::span<const std::int64_t>(*set.labels), {set.size()}));
  }
}

} // namespace owlkit
