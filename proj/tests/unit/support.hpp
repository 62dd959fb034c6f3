#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "owlkit/embedding.hpp"
#include "owlkit/types.hpp"

namespace owlkit::test {

// Hand-rolled generators for property tests. Every test seeds its own engine.
inline Matrix random_matrix(std::mt19937_64& gen, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(gen);
  return m;
}

// Values exactly representable in f32 so f32 files round-trip the f64 view.
inline Matrix random_f32_matrix(std::mt19937_64& gen, Eigen::Index rows, Eigen::Index cols) {
  return random_matrix(gen, rows, cols).cast<float>().cast<double>();
}

inline LabelVector random_labels(std::mt19937_64& gen, std::size_t n, Label classes) {
  std::uniform_int_distribution<Label> pick(0, classes - 1);
  LabelVector y(n);
  for (auto& v : y) v = pick(gen);
  return y;
}

inline std::vector<double> random_scores(std::mt19937_64& gen, std::size_t n, double mean = 0.0, int grid = 0) {
  std::normal_distribution<double> normal(mean, 1.0);
  std::vector<double> s(n);
  for (auto& v : s) v = grid > 0 ? std::round(normal(gen) * grid) / grid : normal(gen);
  return s;
}

// Isotropic Gaussian blobs around the given centers (rows), `per_class` each.
inline EmbeddingSet blobs(std::mt19937_64& gen, const Matrix& centers, std::size_t per_class, double sigma) {
  const auto C = static_cast<std::size_t>(centers.rows());
  Matrix X(static_cast<Eigen::Index>(C * per_class), centers.cols());
  LabelVector y;
  std::normal_distribution<double> normal(0.0, sigma);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      const auto r = static_cast<Eigen::Index>(c * per_class + i);
      for (Eigen::Index j = 0; j < centers.cols(); ++j) X(r, j) = centers(static_cast<Eigen::Index>(c), j) + normal(gen);
      y.push_back(static_cast<Label>(c));
    }
  }
  return EmbeddingSet::from_matrix(X, y);
}

// Centers at `spacing` along distinct axes (needs d >= C).
inline Matrix axis_centers(std::size_t C, std::size_t d, double spacing) {
  Matrix c = Matrix::Zero(static_cast<Eigen::Index>(C), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < C; ++i) c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = spacing;
  return c;
}

// Fresh empty directory under the system temp dir, unique per test.
inline std::filesystem::path scratch_dir(const std::string& tag = "") {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  std::string name = std::string("owlkit_") + info->test_suite_name() + "_" + info->name() + tag;
  for (auto& ch : name)
    if (ch == '/') ch = '_';
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

#define EXPECT_OWL_ERROR(stmt, expected_kind)                                                 \
  do {                                                                                        \
    try {                                                                                     \
      stmt;                                                                                   \
      ADD_FAILURE() << "expected " << ::owlkit::to_string(expected_kind) << " error";         \
    } catch (const ::owlkit::Error& e) {                                                      \
      EXPECT_EQ(e.kind(), expected_kind) << e.what();                                         \
    }                                                                                         \
  } while (0)

} // namespace owlkit::test
