#pragma once

// Integer axial displacement between RF lines by dynamic programming, and its
// sparse application to a handful of equidistant lines.

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "framesel/rfsim.hpp"

namespace framesel {

struct DpParams {
  /// Search range is [-d_max, d_max] samples.
  int d_max = 40;
  /// Penalty per unit displacement jump between neighbouring samples. When
  /// unset, relative_lambda * mean(line1^2) so behaviour does not depend on RF gain.
  std::optional<double> lambda_smooth;
  double relative_lambda = 2.0;

  void validate() const;
  double resolve_lambda(const Eigen::Ref<const Eigen::VectorXd>& line1) const;
};

/// Globally optimal path d minimizing
///   sum_i (line1[i] - line2[clamp(i + d[i])])^2 + lambda * sum_i |d[i] - d[i-1]|.
/// Ties go to smaller |d|, then to the value closer to the neighbouring sample.
Eigen::VectorXi dp_displacement(const Eigen::Ref<const Eigen::VectorXd>& line1,
                                const Eigen::Ref<const Eigen::VectorXd>& line2, const DpParams& params);

/// The objective dp_displacement minimizes, evaluated for an arbitrary path.
double dp_path_cost(const Eigen::Ref<const Eigen::VectorXd>& line1, const Eigen::Ref<const Eigen::VectorXd>& line2,
                    const Eigen::Ref<const Eigen::VectorXi>& path, double lambda);

/// Interior-equidistant line indices floor(l * (j + 1) / (p + 1)), j = 0..p-1.
std::vector<Eigen::Index> select_lines(Eigen::Index l, Eigen::Index p);

/// Position in frame index space (fractional values allowed).
struct FrameCoord {
  double sample = 0.0;
  double line = 0.0;
};

/// K = m * p displacement estimates, ordered line-major then by sample.
struct SparseDisplacement {
  Eigen::VectorXi c;
  std::vector<FrameCoord> coords;
  std::vector<Eigen::Index> line_indices;
  Eigen::Index samples_per_line = 0;

  Eigen::Index size() const { return c.size(); }
};

SparseDisplacement sparse_track(const RfFrame& first, const RfFrame& second, Eigen::Index p, const DpParams& params);

}  // namespace framesel
