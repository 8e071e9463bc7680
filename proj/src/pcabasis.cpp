#include "framesel/pcabasis.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "framesel/binio.hpp"

namespace framesel {

double PcaBasis::orthonormality_error() const {
  const Eigen::MatrixXd gram = components.transpose() * components;
  return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

void PcaBasis::validate() const {
  const Eigen::Index cells = grid.rows * grid.cols;
  require(size() >= 1, "basis must hold at least one component");
  require(grid.rows >= 1 && grid.cols >= 1, "grid dimensions must be positive");
  require(grid.rows <= frame_rows && grid.cols <= frame_cols, "grid must not exceed the frame dimensions");
  require(components.rows() == cells && mean_field.size() == cells, "component length does not match the grid");
  require(explained_variance_ratio.size() == size(), "one explained-variance ratio per component is required");
  require(components.allFinite() && mean_field.allFinite() && explained_variance_ratio.allFinite(),
          "basis contains non-finite values");
  require(orthonormality_error() <= 1e-6, "basis components are not orthonormal");
  for (Eigen::Index j = 0; j < size(); ++j) {
    const double r = explained_variance_ratio[j];
    require(r >= 0.0 && r <= 1.0, "explained-variance ratio outside [0, 1]");
    require(j == 0 || r <= explained_variance_ratio[j - 1], "explained-variance ratios must be non-increasing");
  }
  require(explained_variance_ratio.sum() <= 1.0 + 1e-12, "explained-variance ratios sum above 1");
}

PcaBasis fit_pca(std::span<const Eigen::MatrixXd> fields, Eigen::Index n_components, GridShape grid) {
  require(!fields.empty(), "no training fields");
  const Eigen::Index m = fields.front().rows();
  const Eigen::Index l = fields.front().cols();
  require(grid.rows <= m && grid.cols <= l, "grid must not exceed the field dimensions");
  Eigen::MatrixXd data(static_cast<Eigen::Index>(fields.size()), grid.rows * grid.cols);
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const Eigen::MatrixXd& f = fields[i];
    require(f.rows() == m && f.cols() == l, "training fields differ in size");
    require(f.allFinite(), "training field " + std::to_string(i) + " contains non-finite values");
    data.row(static_cast<Eigen::Index>(i)) = downsample_field(f, grid).transpose();
  }
  return fit_pca_downsampled(std::move(data), m, l, n_components, grid);
}

PcaBasis fit_pca_downsampled(Eigen::MatrixXd data, Eigen::Index frame_rows, Eigen::Index frame_cols,
                             Eigen::Index n_components, GridShape grid) {
  require(n_components >= 1, "at least one component is required");
  const Eigen::Index n = data.rows();
  if (n < n_components + 1) {
    throw Error("PCA with " + std::to_string(n_components) + " components needs at least " +
                std::to_string(n_components + 1) + " training fields, got " + std::to_string(n));
  }
  const Eigen::Index cells = grid.rows * grid.cols;
  require(data.cols() == cells, "downsampled fields do not match the grid");
  require(grid.rows <= frame_rows && grid.cols <= frame_cols, "grid must not exceed the frame dimensions");
  require(n_components <= cells, "more components requested than grid cells");
  require(data.allFinite(), "training fields contain non-finite values");

  PcaBasis basis;
  basis.grid = grid;
  basis.frame_rows = frame_rows;
  basis.frame_cols = frame_cols;
  basis.mean_field = data.colwise().mean().transpose();
  data.rowwise() -= basis.mean_field.transpose();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(data, Eigen::ComputeThinV);
  const Eigen::VectorXd energy = svd.singularValues().array().square();
  const double total = energy.sum();
  require(total > 0.0, "training fields have zero variance");

  basis.components = svd.matrixV().leftCols(n_components);
  for (Eigen::Index j = 0; j < n_components; ++j) {
    Eigen::Index at = 0;
    basis.components.col(j).cwiseAbs().maxCoeff(&at);
    if (basis.components(at, j) < 0.0) basis.components.col(j) *= -1.0;
  }
  basis.explained_variance_ratio = energy.head(n_components) / total;
  return basis;
}

namespace {

struct GridPoint {
  Eigen::Index r0, r1, c0, c1;
  double fr, fc;
};

GridPoint locate(const PcaBasis& basis, const FrameCoord& q) {
  if (!(q.sample >= 0.0 && q.sample <= static_cast<double>(basis.frame_rows - 1) && q.line >= 0.0 &&
        q.line <= static_cast<double>(basis.frame_cols - 1))) {
    throw Error("coordinate (" + std::to_string(q.sample) + ", " + std::to_string(q.line) +
                ") lies outside the " + std::to_string(basis.frame_rows) + "x" + std::to_string(basis.frame_cols) +
                " frame");
  }
  // Grid node (a, b) sits at the centre of its block.
  auto to_grid = [](double v, Eigen::Index frame, Eigen::Index cells) {
    const double g = (v + 0.5) * static_cast<double>(cells) / static_cast<double>(frame) - 0.5;
    return std::clamp(g, 0.0, static_cast<double>(cells - 1));
  };
  const double gr = to_grid(q.sample, basis.frame_rows, basis.grid.rows);
  const double gc = to_grid(q.line, basis.frame_cols, basis.grid.cols);
  GridPoint p;
  p.r0 = static_cast<Eigen::Index>(std::floor(gr));
  p.c0 = static_cast<Eigen::Index>(std::floor(gc));
  p.r1 = std::min(p.r0 + 1, basis.grid.rows - 1);
  p.c1 = std::min(p.c0 + 1, basis.grid.cols - 1);
  p.fr = gr - static_cast<double>(p.r0);
  p.fc = gc - static_cast<double>(p.c0);
  return p;
}

template <typename Vec>
double interpolate(const Vec& flat, Eigen::Index rows, const GridPoint& p) {
  auto at = [&](Eigen::Index r, Eigen::Index c) { return flat[c * rows + r]; };
  return (1.0 - p.fr) * ((1.0 - p.fc) * at(p.r0, p.c0) + p.fc * at(p.r0, p.c1)) +
         p.fr * ((1.0 - p.fc) * at(p.r1, p.c0) + p.fc * at(p.r1, p.c1));
}

}  // namespace

DesignMatrix sample_basis(const PcaBasis& basis, std::span<const FrameCoord> coords) {
  const auto k = static_cast<Eigen::Index>(coords.size());
  const Eigen::Index n = basis.size();
  DesignMatrix out;
  out.A.resize(k, n);
  out.mean.resize(k);
  out.coords.assign(coords.begin(), coords.end());
  for (Eigen::Index row = 0; row < k; ++row) {
    const GridPoint p = locate(basis, coords[static_cast<std::size_t>(row)]);
    out.mean[row] = interpolate(basis.mean_field, basis.grid.rows, p);
    for (Eigen::Index j = 0; j < n; ++j) out.A(row, j) = interpolate(basis.components.col(j), basis.grid.rows, p);
  }
  return out;
}

Eigen::MatrixXd component_grid(const PcaBasis& basis, Eigen::Index j) {
  require(j >= 0 && j < basis.size(), "component index out of range");
  return Eigen::Map<const Eigen::MatrixXd>(basis.components.col(j).data(), basis.grid.rows, basis.grid.cols);
}

Eigen::MatrixXd upsample_grid(const PcaBasis& basis, const Eigen::Ref<const Eigen::VectorXd>& grid_field) {
  require(grid_field.size() == basis.grid.rows * basis.grid.cols, "grid field length mismatch");
  Eigen::MatrixXd out(basis.frame_rows, basis.frame_cols);
  for (Eigen::Index k = 0; k < basis.frame_cols; ++k) {
    for (Eigen::Index r = 0; r < basis.frame_rows; ++r) {
      out(r, k) = interpolate(grid_field, basis.grid.rows,
                              locate(basis, {static_cast<double>(r), static_cast<double>(k)}));
    }
  }
  return out;
}

void save_basis(const PcaBasis& basis, const std::filesystem::path& path) {
  basis.validate();
  binio::Writer w;
  w.magic("PCB1");
  w.u32(static_cast<std::uint32_t>(basis.grid.rows));
  w.u32(static_cast<std::uint32_t>(basis.grid.cols));
  w.u32(static_cast<std::uint32_t>(basis.size()));
  w.u32(static_cast<std::uint32_t>(basis.frame_rows));
  w.u32(static_cast<std::uint32_t>(basis.frame_cols));
  w.u8(basis.center ? 1 : 0);
  for (Eigen::Index i = 0; i < basis.mean_field.size(); ++i) w.f64(basis.mean_field[i]);
  for (Eigen::Index j = 0; j < basis.size(); ++j) {
    for (Eigen::Index i = 0; i < basis.components.rows(); ++i) w.f64(basis.components(i, j));
  }
  for (Eigen::Index j = 0; j < basis.size(); ++j) w.f64(basis.explained_variance_ratio[j]);
  w.save(path);
}

PcaBasis load_basis(const std::filesystem::path& path) {
  auto r = binio::Reader::open(path);
  r.expect_magic("PCB1");
  PcaBasis basis;
  basis.grid.rows = r.u32("g_r");
  basis.grid.cols = r.u32("g_c");
  const Eigen::Index n = r.u32("N");
  basis.frame_rows = r.u32("m");
  basis.frame_cols = r.u32("l");
  const std::uint8_t flag = r.u8("center");
  require(flag <= 1, path.string() + ": center flag must be 0 or 1");
  basis.center = flag == 1;

  const Eigen::Index cells = basis.grid.rows * basis.grid.cols;
  require(cells > 0 && n > 0, path.string() + ": zero grid or component count");
  auto need = [&](std::size_t values, const char* field) {
    if (r.remaining() / 8 < values) throw Error(path.string() + ": truncated while reading field '" + field + "'");
  };
  need(static_cast<std::size_t>(cells), "mean_field");
  basis.mean_field.resize(cells);
  for (Eigen::Index i = 0; i < cells; ++i) basis.mean_field[i] = r.f64("mean_field");
  need(static_cast<std::size_t>(cells) * static_cast<std::size_t>(n), "components");
  basis.components.resize(cells, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < cells; ++i) basis.components(i, j) = r.f64("components");
  }
  need(static_cast<std::size_t>(n), "explained_variance_ratio");
  basis.explained_variance_ratio.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) basis.explained_variance_ratio[j] = r.f64("explained_variance_ratio");
  r.expect_end();

  try {
    basis.validate();
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return basis;
}

}  // namespace framesel
