#pragma once

// Sparse DP tracking -> PCA design matrix -> least-squares weights.

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "framesel/dptrack.hpp"
#include "framesel/error.hpp"
#include "framesel/pcabasis.hpp"
#include "framesel/rfsim.hpp"

namespace framesel {

/// Minimum-norm least-squares solution of A w ~= c via complete orthogonal
/// decomposition.
template <typename DerivedA, typename DerivedC>
Eigen::VectorXd solve_lsq(const Eigen::MatrixBase<DerivedA>& A, const Eigen::MatrixBase<DerivedC>& c) {
  require(A.rows() == c.rows() && c.cols() == 1, "design matrix and target vector disagree in length");
  require(A.rows() >= A.cols(), "least-squares system must not be underdetermined");
  const Eigen::MatrixXd a = A.template cast<double>();
  const Eigen::VectorXd b = c.template cast<double>();
  require(a.allFinite() && b.allFinite(), "least-squares inputs contain non-finite values");
  return Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(a).solve(b);
}

struct FeatureVector {
  Eigen::VectorXd w;
  /// ||A w - c|| / sqrt(K)
  double residual_rms = 0.0;
  int i = 0;
  int j = 0;

  /// Classifier input: w, optionally followed by residual_rms.
  Eigen::VectorXd classifier_input(bool append_residual = false) const;
};

struct FeatureOptions {
  Eigen::Index lines = 5;
  DpParams dp;
  bool append_residual = false;
};

FeatureVector extract_features(const RfFrame& first, const RfFrame& second, const PcaBasis& basis, Eigen::Index p,
                               const DpParams& params);

using FramePair = std::pair<int, int>;

/// Element k equals extract_features on pairs[k]. `threads` > 1 spreads pairs
/// over worker threads without changing the result.
std::vector<FeatureVector> extract_features_batch(std::span<const RfFrame> sequence, std::span<const FramePair> pairs,
                                                  const PcaBasis& basis, Eigen::Index p, const DpParams& params,
                                                  unsigned threads = 1);

/// Columns i,j,w_1..w_N,residual_rms.
void write_features_csv(const std::filesystem::path& path, std::span<const FeatureVector> features);
std::vector<FeatureVector> read_features_csv(const std::filesystem::path& path);

}  // namespace framesel
