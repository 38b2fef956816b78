#pragma once

#include <Eigen/Core>

namespace archevo {

/// Row-major so that one sample of a batch is a contiguous row.
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using FeatureMatrix = Matrix<float>;

}  // namespace archevo
