#pragma once

// Dense DP displacement, sliding least-squares strain and the strain-image
// SNR / CNR figures of merit.

#include <Eigen/Dense>
#include <cmath>

#include "framesel/dptrack.hpp"
#include "framesel/error.hpp"
#include "framesel/rfsim.hpp"

namespace framesel {

/// dp_displacement on every line, then (optionally) a 3x3 median filter.
Eigen::MatrixXi dense_displacement(const RfFrame& first, const RfFrame& second, const DpParams& params,
                                   bool median_filter = true);

/// 3x3 median with edge replication.
Eigen::MatrixXi median3x3(const Eigen::MatrixXi& field);

struct StrainImage {
  /// (m - window + 1) x l; row r is centred on displacement sample r + window / 2.
  Eigen::MatrixXd strain;
  int window = 0;
};

/// Per line, the slope of the least-squares line through `window`
/// consecutive displacement samples (samples per sample).
template <typename Derived>
StrainImage lsq_strain(const Eigen::MatrixBase<Derived>& displacement, int window) {
  const Eigen::Index m = displacement.rows();
  require(window >= 3 && window % 2 == 1, "strain window must be odd and at least 3");
  require(4 * static_cast<Eigen::Index>(window) <= m,
          "strain window " + std::to_string(window) + " exceeds a quarter of the " + std::to_string(m) + "-sample line");
  const int half = window / 2;
  double denom = 0.0;
  for (int k = -half; k <= half; ++k) denom += static_cast<double>(k) * k;

  StrainImage out;
  out.window = window;
  out.strain.resize(m - window + 1, displacement.cols());
  for (Eigen::Index c = 0; c < displacement.cols(); ++c) {
    for (Eigen::Index r = 0; r < out.strain.rows(); ++r) {
      double num = 0.0;
      for (int k = -half; k <= half; ++k) num += k * static_cast<double>(displacement(r + half + k, c));
      out.strain(r, c) = num / denom;
    }
  }
  return out;
}

/// Rectangle of strain-image indices: rows [row0, row0 + rows), cols [col0, col0 + cols).
struct Window {
  Eigen::Index row0 = 0;
  Eigen::Index rows = 0;
  Eigen::Index col0 = 0;
  Eigen::Index cols = 0;

  bool inside(Eigen::Index image_rows, Eigen::Index image_cols) const;
  bool overlaps(const Window& other) const;
};

struct WindowStats {
  double mean = 0.0;
  /// Unbiased (n - 1) standard deviation.
  double stddev = 0.0;
  Eigen::Index count = 0;
};

WindowStats window_stats(const Eigen::Ref<const Eigen::MatrixXd>& strain, const Window& window);

/// mean / stddev
double snr(const WindowStats& background);
/// sqrt(2 (mean_b - mean_t)^2 / (var_b + var_t))
double cnr(const WindowStats& target, const WindowStats& background);

double snr(const Eigen::Ref<const Eigen::MatrixXd>& strain, const Window& background);
double cnr(const Eigen::Ref<const Eigen::MatrixXd>& strain, const Window& target, const Window& background);

struct QualityReport {
  double snr = 0.0;
  double cnr = 0.0;
  Window target;
  Window background;
  WindowStats target_stats;
  WindowStats background_stats;
};

/// SNR on the background window and CNR between both; windows must be disjoint.
QualityReport assess(const Eigen::Ref<const Eigen::MatrixXd>& strain, const Window& target, const Window& background);

/// Target: square of half-side 0.6 * radius centred on the inclusion.
/// Background: a same-size square in the upper-left, clear of the inclusion
/// (upper-right when the inclusion has drifted left).
/// Both in strain-image indices for the given differentiation window.
struct WindowPair {
  Window target;
  Window background;
};
WindowPair default_windows(const Inclusion& inclusion, const FrameGeometry& geometry, int strain_window);

}  // namespace framesel
