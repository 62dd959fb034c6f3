#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace owlkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Label = std::int64_t;
using LabelVector = std::vector<Label>;
using IdVector = std::vector<std::int64_t>;
using IndexVector = std::vector<std::size_t>;

inline constexpr Label kUnlabeled = -1;

} // namespace owlkit
