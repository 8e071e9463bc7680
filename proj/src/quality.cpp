#include "framesel/quality.hpp"

#include <algorithm>
#include <array>

namespace framesel {

Eigen::MatrixXi dense_displacement(const RfFrame& first, const RfFrame& second, const DpParams& params,
                                   bool median_filter) {
  require(first.m() == second.m() && first.l() == second.l(), "frame dimensions differ");
  Eigen::MatrixXi field(first.m(), first.l());
  for (Eigen::Index k = 0; k < first.l(); ++k) {
    const Eigen::VectorXd a = first.samples.col(k).cast<double>();
    const Eigen::VectorXd b = second.samples.col(k).cast<double>();
    field.col(k) = dp_displacement(a, b, params);
  }
  return median_filter ? median3x3(field) : field;
}

Eigen::MatrixXi median3x3(const Eigen::MatrixXi& field) {
  const Eigen::Index rows = field.rows();
  const Eigen::Index cols = field.cols();
  Eigen::MatrixXi out(rows, cols);
  std::array<int, 9> v{};
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      std::size_t n = 0;
      for (Eigen::Index dc = -1; dc <= 1; ++dc) {
        for (Eigen::Index dr = -1; dr <= 1; ++dr) {
          v[n++] = field(std::clamp<Eigen::Index>(r + dr, 0, rows - 1), std::clamp<Eigen::Index>(c + dc, 0, cols - 1));
        }
      }
      std::nth_element(v.begin(), v.begin() + 4, v.end());
      out(r, c) = v[4];
    }
  }
  return out;
}

bool Window::inside(Eigen::Index image_rows, Eigen::Index image_cols) const {
  return row0 >= 0 && col0 >= 0 && rows >= 1 && cols >= 1 && row0 + rows <= image_rows && col0 + cols <= image_cols;
}

bool Window::overlaps(const Window& o) const {
  return row0 < o.row0 + o.rows && o.row0 < row0 + rows && col0 < o.col0 + o.cols && o.col0 < col0 + cols;
}

WindowStats window_stats(const Eigen::Ref<const Eigen::MatrixXd>& strain, const Window& window) {
  require(window.inside(strain.rows(), strain.cols()), "window lies outside the strain image");
  const auto block = strain.block(window.row0, window.col0, window.rows, window.cols);
  WindowStats s;
  s.count = block.size();
  s.mean = block.mean();
  s.stddev = s.count > 1 ? std::sqrt((block.array() - s.mean).square().sum() / static_cast<double>(s.count - 1)) : 0.0;
  return s;
}

double snr(const WindowStats& background) {
  require(background.stddev > 0.0, "SNR undefined: background window has zero variance");
  return background.mean / background.stddev;
}

double cnr(const WindowStats& target, const WindowStats& background) {
  const double noise = background.stddev * background.stddev + target.stddev * target.stddev;
  require(noise > 0.0, "CNR undefined: both windows have zero variance");
  const double contrast = background.mean - target.mean;
  return std::sqrt(2.0 * contrast * contrast / noise);
}

double snr(const Eigen::Ref<const Eigen::MatrixXd>& strain, const Window& background) {
  return snr(window_stats(strain, background));
}

double cnr(const Eigen::Ref<const Eigen::MatrixXd>& strain, const Window& target, const Window& background) {
  return cnr(window_stats(strain, target), window_stats(strain, background));
}

QualityReport assess(const Eigen::Ref<const Eigen::MatrixXd>& strain, const Window& target, const Window& background) {
  require(!target.overlaps(background), "target and background windows overlap");
  QualityReport q;
  q.target = target;
  q.background = background;
  q.target_stats = window_stats(strain, target);
  q.background_stats = window_stats(strain, background);
  q.snr = snr(q.background_stats);
  q.cnr = cnr(q.target_stats, q.background_stats);
  return q;
}

WindowPair default_windows(const Inclusion& inclusion, const FrameGeometry& geometry, int strain_window) {
  const Eigen::Index strain_rows = geometry.m - strain_window + 1;
  const int half = strain_window / 2;
  const double half_side_mm = 0.6 * inclusion.radius_mm;
  const auto half_rows = static_cast<Eigen::Index>(std::floor(half_side_mm / geometry.sample_spacing_mm));
  const auto half_cols = static_cast<Eigen::Index>(std::floor(half_side_mm / geometry.line_pitch_mm));
  require(half_rows >= 1 && half_cols >= 1, "inclusion too small for a target window");

  WindowPair w;
  const auto centre_row =
      static_cast<Eigen::Index>(std::lround(geometry.sample_of(inclusion.center_axial_mm))) - half;
  const auto centre_col = static_cast<Eigen::Index>(std::lround(geometry.line_of(inclusion.center_lateral_mm)));
  w.target = {centre_row - half_rows, 2 * half_rows + 1, centre_col - half_cols, 2 * half_cols + 1};

  require(w.target.inside(strain_rows, geometry.l), "target window does not fit in the strain image");

  // Upper-left, inset from the borders so clamped edge tracking stays out;
  // mirrored to the upper-right when the inclusion has drifted into it.
  const Eigen::Index inset_rows = std::max<Eigen::Index>(strain_rows / 20, 1);
  const Eigen::Index inset_cols = std::max<Eigen::Index>(geometry.l / 32, 1);
  const Window left{inset_rows, w.target.rows, inset_cols, w.target.cols};
  const Window right{inset_rows, w.target.rows, geometry.l - inset_cols - w.target.cols, w.target.cols};

  auto clear = [&](const Window& b) {
    if (!b.inside(strain_rows, geometry.l) || b.overlaps(w.target)) return false;
    // The background pixel nearest the inclusion centre must lie outside it.
    const double near_axial =
        std::clamp(inclusion.center_axial_mm, geometry.axial_mm(static_cast<double>(b.row0 + half)),
                   geometry.axial_mm(static_cast<double>(b.row0 + b.rows - 1 + half)));
    const double near_lateral =
        std::clamp(inclusion.center_lateral_mm, geometry.lateral_mm(static_cast<double>(b.col0)),
                   geometry.lateral_mm(static_cast<double>(b.col0 + b.cols - 1)));
    return !inclusion.contains(near_axial, near_lateral);
  };
  if (clear(left)) {
    w.background = left;
  } else if (clear(right)) {
    w.background = right;
  } else {
    throw Error("no background window clear of the inclusion");
  }
  return w;
}

}  // namespace framesel
