#pragma once

#include <vector>

#include <Eigen/Dense>

#include "actlang/classifier/nn.hpp"

namespace actlang::classifier {

using IdMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MaskMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Right-padded rows of ids. mask(r, c) is true where the position is padding,
// and padded positions hold the reserved pad id.
struct PaddedBatch {
  IdMatrix ids;
  MaskMatrix mask;
  std::vector<int> labels;
  // Per-row (max_len x feature_dim) inputs; only filled for feature-based inputs.
  std::vector<nn::Mat<double>> features;

  Eigen::Index rows() const { return ids.rows(); }
  Eigen::Index max_len() const { return ids.cols(); }
  bool has_features() const { return !features.empty(); }
};

}  // namespace actlang::classifier
