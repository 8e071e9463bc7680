#pragma once

// Principal components of axial displacement fields on a coarse grid, and
// their bilinear sampling at sparse frame coordinates.

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <vector>

#include "framesel/dptrack.hpp"
#include "framesel/error.hpp"

namespace framesel {

struct GridShape {
  Eigen::Index rows = 64;
  Eigen::Index cols = 48;
};

struct PcaBasis {
  GridShape grid;
  /// Flattened column-major, length grid.rows * grid.cols.
  Eigen::VectorXd mean_field;
  /// One orthonormal component per column.
  Eigen::MatrixXd components;
  Eigen::VectorXd explained_variance_ratio;
  Eigen::Index frame_rows = 0;
  Eigen::Index frame_cols = 0;
  /// Subtract the sampled mean field from displacements before fitting weights.
  bool center = false;

  Eigen::Index size() const { return components.cols(); }
  /// max |C^T C - I|
  double orthonormality_error() const;
  void validate() const;
};

/// Block average of an m x l field onto the grid, flattened column-major.
/// Row r falls in grid row floor(r * rows / m); likewise for columns.
template <typename Derived>
Eigen::VectorXd downsample_field(const Eigen::MatrixBase<Derived>& field, GridShape grid) {
  const Eigen::Index m = field.rows();
  const Eigen::Index l = field.cols();
  require(grid.rows >= 1 && grid.cols >= 1 && grid.rows <= m && grid.cols <= l, "grid must fit inside the field");
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(grid.rows, grid.cols);
  Eigen::MatrixXd count = Eigen::MatrixXd::Zero(grid.rows, grid.cols);
  for (Eigen::Index k = 0; k < l; ++k) {
    const Eigen::Index gc = k * grid.cols / l;
    for (Eigen::Index r = 0; r < m; ++r) {
      const Eigen::Index gr = r * grid.rows / m;
      sum(gr, gc) += static_cast<double>(field(r, k));
      count(gr, gc) += 1.0;
    }
  }
  const Eigen::MatrixXd avg = sum.cwiseQuotient(count);
  return Eigen::Map<const Eigen::VectorXd>(avg.data(), avg.size());
}

/// Centred PCA by thin SVD of the stacked, downsampled fields. Components are
/// sign-normalized so their largest-magnitude entry is positive.
PcaBasis fit_pca(std::span<const Eigen::MatrixXd> fields, Eigen::Index n_components, GridShape grid = {});

/// Same fit from fields already passed through downsample_field, one per row.
/// Lets large corpora be reduced field by field.
PcaBasis fit_pca_downsampled(Eigen::MatrixXd grid_data, Eigen::Index frame_rows, Eigen::Index frame_cols,
                             Eigen::Index n_components, GridShape grid);

/// A(k, j) = component j bilinearly interpolated at coords[k]; `mean` holds
/// the interpolated mean field at the same points.
struct DesignMatrix {
  Eigen::MatrixXd A;
  Eigen::VectorXd mean;
  std::vector<FrameCoord> coords;
};

DesignMatrix sample_basis(const PcaBasis& basis, std::span<const FrameCoord> coords);

/// Component j reshaped to grid.rows x grid.cols.
Eigen::MatrixXd component_grid(const PcaBasis& basis, Eigen::Index j);

/// Evaluates a flattened grid field at every pixel of the m x l frame.
Eigen::MatrixXd upsample_grid(const PcaBasis& basis, const Eigen::Ref<const Eigen::VectorXd>& grid_field);

/// ".pcb": "PCB1", u32 g_r, g_c, N, m, l, u8 center, f64 mean, f64 components, f64 ratios.
void save_basis(const PcaBasis& basis, const std::filesystem::path& path);
PcaBasis load_basis(const std::filesystem::path& path);

}  // namespace framesel
